"""Experiment configuration: JSON schema, validation, scenario construction.

A config file describes one scenario: a mesh, the region boxes, one or two
coefficient sets, the exponents to sweep, quadrature parameters, an optional
interior deformation, and the suite selection.  Validation is strict (unknown
keys are rejected) and happens before any numerics; geometric sanity checks
that the schema language cannot express (box ordering, region separation,
coefficient shapes) are applied immediately after.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .gauge import Diffeo
from .mesh import (
    Mesh,
    MeshError,
    RegionError,
    RegionLabels,
    build_interval_mesh,
    build_rect_mesh,
    label_regions,
)
from .operators import CoefficientError, CoefficientField
from .calculus import TimeQuadrature


class ConfigError(ValueError):
    """Invalid configuration: schema violation or failed semantic check."""


SUITE_NAMES = ("calibrate", "assemble", "direct", "reduce", "gauge", "diagnostics")

_BOX_1D = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}
_BOX_2D = {
    "type": "array",
    "items": _BOX_1D,
    "minItems": 2,
    "maxItems": 2,
}
_BOX = {"oneOf": [_BOX_1D, _BOX_2D]}

_OPERATOR_SPEC = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "A": {
            "oneOf": [
                {"type": "number", "exclusiveMinimum": 0},
                {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}},
                },
            ]
        },
        "b": {
            "type": "array",
            "items": {"type": "number"},
        },
        "c": {"type": "number"},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["mesh", "regions", "operators", "a", "quad", "seed"],
    "properties": {
        "mesh": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "box", "n_cells"],
                    "properties": {
                        "kind": {"const": "interval"},
                        "box": _BOX_1D,
                        "n_cells": {"type": "integer", "minimum": 2},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "box", "nx", "ny"],
                    "properties": {
                        "kind": {"const": "rect"},
                        "box": _BOX_2D,
                        "nx": {"type": "integer", "minimum": 2},
                        "ny": {"type": "integer", "minimum": 2},
                    },
                },
            ]
        },
        "regions": {
            "type": "object",
            "additionalProperties": False,
            "required": ["omega", "w", "wtilde"],
            "properties": {"omega": _BOX, "w": _BOX, "wtilde": _BOX},
        },
        "operators": {
            "type": "array",
            "minItems": 1,
            "maxItems": 2,
            "items": _OPERATOR_SPEC,
        },
        "a": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "number",
                "exclusiveMinimum": 0,
                "exclusiveMaximum": 1,
            },
        },
        "quad": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "s_max": {"type": "number", "exclusiveMinimum": 0},
                "n": {"type": "integer", "minimum": 2},
            },
        },
        "diffeo": {
            "type": "object",
            "additionalProperties": False,
            "required": ["rho", "factor"],
            "properties": {
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "factor": {
                    "type": "number",
                    "exclusiveMinimum": 0,
                    "maximum": 1,
                },
            },
        },
        "suites": {
            "type": "array",
            "minItems": 1,
            "uniqueItems": True,
            "items": {"enum": list(SUITE_NAMES)},
        },
        "out_dir": {"type": "string", "minLength": 1},
        "seed": {"type": "integer", "minimum": 0},
    },
}


def _as_boxes(raw, dim: int, name: str) -> np.ndarray:
    box = np.asarray(raw, dtype=float).reshape(-1, 2) if dim > 1 else np.asarray(
        [raw], dtype=float
    )
    if box.shape != (dim, 2):
        raise ConfigError(f"{name} box does not match mesh dimension {dim}")
    if np.any(box[:, 0] >= box[:, 1]):
        raise ConfigError(f"{name} box has a non-increasing axis")
    return box


def _closures_meet(one: np.ndarray, other: np.ndarray) -> bool:
    return bool(
        np.all(np.maximum(one[:, 0], other[:, 0]) <= np.minimum(one[:, 1], other[:, 1]))
    )


@dataclass(frozen=True)
class OperatorSpec:
    """One coefficient set, already shaped for the mesh dimension."""

    A: np.ndarray | float
    b: np.ndarray | None
    c: float

    @staticmethod
    def parse(raw: dict, dim: int) -> "OperatorSpec":
        A = raw.get("A", 1.0)
        if isinstance(A, list):
            A = np.asarray(A, dtype=float)
            if A.shape != (dim, dim):
                raise ConfigError(f"conductivity matrix must be {dim}x{dim}")
            if not np.allclose(A, A.T, rtol=0.0, atol=0.0):
                raise ConfigError("conductivity matrix must be symmetric")
        b = raw.get("b")
        if b is not None:
            if len(b) != dim:
                raise ConfigError(f"magnetic coefficient must have {dim} components")
            b = np.asarray(b, dtype=float)
        return OperatorSpec(A=A, b=b, c=raw.get("c", 0.0))

    def build_field(self, mesh: Mesh, labels: RegionLabels) -> CoefficientField:
        try:
            return CoefficientField.build(
                mesh, A=self.A, b=self.b, c=self.c, labels=labels
            )
        except (CoefficientError, ValueError) as exc:
            raise ConfigError(f"coefficient spec rejected: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description, ready to build the scenario."""

    mesh_spec: dict
    region_boxes: dict
    operator_specs: tuple
    exponents: tuple
    quad: TimeQuadrature
    diffeo_spec: dict | None
    suites: tuple
    out_dir: str
    seed: int

    @property
    def dim(self) -> int:
        return 1 if self.mesh_spec["kind"] == "interval" else 2

    def build_mesh(self) -> Mesh:
        spec = self.mesh_spec
        try:
            if spec["kind"] == "interval":
                return build_interval_mesh(*spec["box"], spec["n_cells"])
            return build_rect_mesh(spec["box"], spec["nx"], spec["ny"])
        except MeshError as exc:
            raise ConfigError(f"mesh spec rejected: {exc}") from exc

    def build_labels(self, mesh: Mesh) -> RegionLabels:
        r = self.region_boxes
        try:
            return label_regions(mesh, r["omega"], r["w"], r["wtilde"])
        except RegionError as exc:
            raise ConfigError(f"region boxes rejected: {exc}") from exc

    def build_fields(self, mesh: Mesh, labels: RegionLabels) -> list:
        return [spec.build_field(mesh, labels) for spec in self.operator_specs]

    def build_diffeo(self, mesh: Mesh) -> Diffeo | None:
        if self.diffeo_spec is None:
            return None
        return Diffeo.radial_shrink(
            mesh, self.diffeo_spec["rho"], self.diffeo_spec["factor"]
        )


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw config dict and return the typed configuration.

    Schema validation runs first (unknown keys rejected), then the semantic
    checks: box ordering and dimensions, strict separation of the closed
    Omega box from each window box, coefficient shapes, and containment of
    the deformation ball in Omega.
    """
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {path}: {exc.message}") from exc

    dim = 1 if raw["mesh"]["kind"] == "interval" else 2
    omega = _as_boxes(raw["regions"]["omega"], dim, "omega")
    w = _as_boxes(raw["regions"]["w"], dim, "w")
    wtilde = _as_boxes(raw["regions"]["wtilde"], dim, "wtilde")
    for name, window in (("w", w), ("wtilde", wtilde)):
        if _closures_meet(omega, window):
            raise ConfigError(f"omega and {name} boxes must have disjoint closures")

    mesh_box = _as_boxes(raw["mesh"]["box"], dim, "mesh")
    for name, box in (("omega", omega), ("w", w), ("wtilde", wtilde)):
        if np.any(box[:, 0] < mesh_box[:, 0]) or np.any(box[:, 1] > mesh_box[:, 1]):
            raise ConfigError(f"{name} box leaves the mesh box")

    specs = tuple(OperatorSpec.parse(op, dim) for op in raw["operators"])

    quad_raw = raw.get("quad", {})
    quad = TimeQuadrature(
        s_max=float(quad_raw.get("s_max", 4.0)), n=int(quad_raw.get("n", 200))
    )

    diffeo = raw.get("diffeo")
    if diffeo is not None:
        rho = diffeo["rho"]
        if np.any(omega[:, 0] >= -rho) or np.any(omega[:, 1] <= rho):
            raise ConfigError("deformation ball must sit strictly inside omega")

    return ExperimentConfig(
        mesh_spec=raw["mesh"],
        region_boxes={"omega": raw["regions"]["omega"], "w": raw["regions"]["w"],
                      "wtilde": raw["regions"]["wtilde"]},
        operator_specs=specs,
        exponents=tuple(float(a) for a in raw["a"]),
        quad=quad,
        diffeo_spec=diffeo,
        suites=tuple(raw.get("suites", SUITE_NAMES)),
        out_dir=raw.get("out_dir", "out"),
        seed=int(raw["seed"]),
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    return parse_config(raw)
