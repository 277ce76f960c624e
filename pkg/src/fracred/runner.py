"""Suite runner: build a scenario from a config, run suites, write results.

Suites execute in the declared order

    calibrate -> assemble -> direct -> reduce -> gauge -> diagnostics

each appending rows to the output set.  Contract violations inside a suite
are collected as failures (the run continues with the remaining suites where
that makes sense); a scenario whose operator cannot be assembled at all
aborts the remaining suites, which are then reported as skipped.  All output
files are written with full-precision floats and no timestamps, so reruns
with the same config and seed are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calculus import calibration_rows, fractional_stiffness
from .config import SUITE_NAMES, ConfigError, ExperimentConfig
from .diagnostics import heat_bound_check, heatflow_rigidity_probe, runge_rank, ucp_quotient
from .dirichlet import ExteriorData, solve_exterior_value, stability_constant
from .gauge import gauge_invariance_check, pushforward_operator
from .mesh import dump_json
from .operators import AssemblyError, PositivityError, assemble
from .reduction import lift, theorem1_probe


SUITE_DESCRIPTIONS = {
    "calibrate": "scalar quadrature calibration across the operator spectrum",
    "assemble": "operator assembly report: spectrum range, ellipticity, sizes",
    "direct": "exterior-value solves: zero datum, linearity, stability constant",
    "reduce": "lifted-pair residuals and exterior/boundary Cauchy gaps",
    "gauge": "invariance of exterior data under the configured deformation",
    "diagnostics": "singular-value reports, heat-kernel ratios, rigidity probe",
}


class ContractError(RuntimeError):
    """A suite-level asserted contract failed."""


@dataclass
class RunResult:
    ok: bool
    failures: list
    skipped: list
    outputs: list
    out_dir: Path


class RunContext:
    """Scenario state shared by the suites of one run."""

    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.mesh = cfg.build_mesh()
        self.labels = cfg.build_labels(self.mesh)
        self.fields = cfg.build_fields(self.mesh, self.labels)
        self.quad = cfg.quad
        self.diffeo = cfg.build_diffeo(self.mesh)
        self.rng = np.random.default_rng(seed)
        self.outputs: dict[str, str] = {}
        self._ops: dict[int, object] = {}

    def operator(self, i: int = 0):
        if i not in self._ops:
            self._ops[i] = assemble(self.mesh, self.fields[i])
        return self._ops[i]

    def free_region_nodes(self, op, tag: str) -> np.ndarray:
        nodes = self.labels.node_set(tag)
        return nodes[op.node_to_dof[nodes] >= 0]

    def probes(self, op) -> list:
        return [
            ExteriorData.hat(op, self.labels, node)
            for node in self.free_region_nodes(op, "W")
        ]


def _csv(rows: list, header: str) -> str:
    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, str):
            return v
        return format(float(v), ".17g")

    lines = [header] + [",".join(cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _suite_calibrate(ctx: RunContext) -> None:
    op = ctx.operator(0)
    lam_min, lam_max = float(op.eigenvalues[0]), float(op.eigenvalues[-1])
    lambdas = np.unique(
        np.concatenate([np.geomspace(lam_min, lam_max, 9), [1.0, 10.0]])
    )
    rows = []
    worst = {}
    for a in ctx.cfg.exponents:
        for lam, exact, approx, rel in calibration_rows(ctx.quad, lambdas, a):
            rows.append((a, lam, exact, approx, rel))
        worst[a] = ctx.quad.ensure_calibrated(lam_min, lam_max, a)
    ctx.outputs["calibration.csv"] = _csv(
        rows, "a,lambda,exact,quadrature,rel_error"
    )
    ctx.outputs["calibration.json"] = dump_json(
        {
            "s_max": ctx.quad.s_max,
            "n": ctx.quad.n,
            "spectrum": [lam_min, lam_max],
            "worst_rel_error": {str(a): worst[a] for a in ctx.cfg.exponents},
        }
    ) + "\n"


def _suite_assemble(ctx: RunContext) -> None:
    report = []
    for i in range(len(ctx.fields)):
        op = ctx.operator(i)
        report.append(
            {
                "operator": i,
                "n_dofs": op.n_dofs,
                "lambda_min": float(op.eigenvalues[0]),
                "lambda_max": float(op.eigenvalues[-1]),
                "ellipticity_bound": float(op.coeffs.bound),
                "complex": bool(np.iscomplexobj(op.K)),
            }
        )
    ctx.outputs["assemble.json"] = dump_json({"operators": report}) + "\n"


def _suite_direct(ctx: RunContext) -> None:
    op = ctx.operator(0)
    labels = ctx.labels
    w_nodes = labels.w_nodes
    per_a = {}
    for a in ctx.cfg.exponents:
        zero = ExteriorData.from_node_values(
            op, labels, w_nodes, np.zeros(w_nodes.size)
        )
        sol0 = solve_exterior_value(op, a, zero)
        if np.any(sol0.u != 0):
            raise ContractError(f"zero datum gave a nonzero solution at a={a}")

        f = ExteriorData.from_node_values(
            op, labels, w_nodes, ctx.rng.standard_normal(w_nodes.size)
        )
        g = ExteriorData.from_node_values(
            op, labels, w_nodes, ctx.rng.standard_normal(w_nodes.size)
        )
        alpha, beta = 0.7, -1.3
        combo = ExteriorData(alpha * f.values + beta * g.values, f.w_dofs)
        u_combo = solve_exterior_value(op, a, combo).u
        u_sep = alpha * solve_exterior_value(op, a, f).u + beta * solve_exterior_value(
            op, a, g
        ).u
        lin = float(
            np.linalg.norm(u_combo - u_sep) / max(np.linalg.norm(u_combo), 1e-300)
        )
        if lin > 1e-12:
            raise ContractError(f"solve not linear at a={a}: residual {lin:.3e}")

        c_stab = stability_constant(op, a)
        interior = op.omega_interior_dofs(labels)
        G = fractional_stiffness(op, a)
        res = float(np.abs((G @ solve_exterior_value(op, a, f).u)[interior]).max())
        per_a[str(a)] = {
            "linearity_residual": lin,
            "stability_constant": c_stab,
            "interior_weak_residual": res,
        }
    ctx.outputs["direct.json"] = dump_json({"per_a": per_a}) + "\n"


def _suite_reduce(ctx: RunContext) -> None:
    op = ctx.operator(0)
    labels = ctx.labels
    probes = ctx.probes(op)
    doc = {"per_a": {}}
    for a in ctx.cfg.exponents:
        worst = {"phi": 0.0, "psi": 0.0, "interior": 0.0}
        for f in probes:
            pair = lift(op, a, solve_exterior_value(op, a, f))
            for key in worst:
                worst[key] = max(worst[key], pair.residuals[key])
        self_probe = theorem1_probe(op, op, a, probes, labels)
        if self_probe["exterior_gap"] > 1e-10 or self_probe["boundary_gap"] > 1e-10:
            raise ContractError(
                f"identical operators disagree at a={a}: {self_probe['exterior_gap']:.3e}"
            )
        entry = {
            "lift_residuals": worst,
            "self_exterior_gap": self_probe["exterior_gap"],
            "self_boundary_gap": self_probe["boundary_gap"],
        }
        if len(ctx.fields) == 2:
            other = ctx.operator(1)
            pair_probe = theorem1_probe(op, other, a, probes, labels)
            entry["pair_exterior_gap"] = pair_probe["exterior_gap"]
            entry["pair_boundary_gap"] = pair_probe["boundary_gap"]
        doc["per_a"][str(a)] = entry
    ctx.outputs["cauchy_gap.json"] = dump_json(doc) + "\n"


def _suite_gauge(ctx: RunContext) -> None:
    if ctx.diffeo is None:
        ctx.outputs["gauge_check.json"] = dump_json(
            {"skipped": "no deformation configured"}
        ) + "\n"
        return
    op = ctx.operator(0)
    moved = pushforward_operator(op, ctx.diffeo)
    km_dev = max(
        float(np.abs(op.K - moved.K).max()), float(np.abs(op.M - moved.M).max())
    )
    if km_dev > 1e-12:
        raise ContractError(f"transported matrices differ by {km_dev:.3e}")
    coeff_diff = float(np.abs(op.coeffs.A - moved.coeffs.A).max())
    probes = ctx.probes(op)
    per_a = {}
    for a in ctx.cfg.exponents:
        dev = gauge_invariance_check(op, moved, a, ctx.labels, probes)
        if dev > 1e-10:
            raise ContractError(f"exterior data moved by {dev:.3e} at a={a}")
        per_a[str(a)] = dev
    ctx.outputs["gauge_check.json"] = dump_json(
        {
            "rho": ctx.cfg.diffeo_spec["rho"],
            "factor": ctx.cfg.diffeo_spec["factor"],
            "matrix_deviation": km_dev,
            "coefficient_difference": coeff_diff,
            "cauchy_deviation_per_a": per_a,
        }
    ) + "\n"


def _plain_laplacian(op) -> bool:
    eye = np.eye(op.mesh.dim)
    return (
        op.mass_density is None
        and not np.iscomplexobj(op.K)
        and bool(np.all(op.coeffs.A == eye))
        and not np.any(op.coeffs.b)
        and not np.any(op.coeffs.c)
    )


def _heat_pairs(ctx: RunContext, op) -> list:
    # pairs straddling the origin, comfortably away from the box edge
    targets = [0.0, 0.1, 0.2]
    nodes = []
    free = op.free_nodes
    pts = op.mesh.nodes[free]
    for x in targets:
        probe = np.full(op.mesh.dim, 0.0)
        probe[0] = x
        nodes.append(int(free[np.argmin(np.linalg.norm(pts - probe, axis=1))]))
    return [(nodes[0], n) for n in nodes]


def _suite_diagnostics(ctx: RunContext) -> None:
    op = ctx.operator(0)
    labels = ctx.labels
    doc = {"per_a": {}}
    sval_rows = []

    wt = ctx.free_region_nodes(op, "WTILDE")
    chain = [wt[: max(1, wt.size // 3)], wt[: max(2, (2 * wt.size) // 3)], wt]
    for a in ctx.cfg.exponents:
        entry = {}
        rr = runge_rank(op, a, labels)
        entry["runge"] = {
            "shape": list(rr.shape),
            "smin": rr.smallest,
            "smax": rr.largest,
            "full_row_rank": rr.full_row_rank,
        }
        if labels.e_nodes.size <= labels.w_nodes.size and not rr.full_row_rank:
            raise ContractError(f"flux response map rank-deficient at a={a}")
        for idx, sv in enumerate(rr.singular_values):
            sval_rows.append((rr.tag, idx, sv))

        reports = [ucp_quotient(op, a, sigma) for sigma in chain]
        for rep in reports:
            if not rep.smallest > 0:
                raise ContractError(f"vanishing data quotient at a={a} ({rep.tag})")
            for idx, sv in enumerate(rep.singular_values):
                sval_rows.append((rep.tag, idx, sv))
        for small, big in zip(reports, reports[1:]):
            if not big.dominates(small):
                raise ContractError(
                    f"data quotient not monotone under enlargement at a={a}"
                )
        entry["ucp"] = [
            {"sigma_size": int(len(sigma)), "smin": rep.smallest}
            for sigma, rep in zip(chain, reports)
        ]
        doc["per_a"][str(a)] = entry

    if _plain_laplacian(op):
        h = float(np.sqrt(2.0 * op.mesh.element_measures().min())
                  if op.mesh.dim == 2 else op.mesh.element_measures().min())
        span = float(np.min(op.mesh.box[:, 1] - op.mesh.box[:, 0]))
        t = h * span / 2.0  # geometric mean of the window ends
        report = heat_bound_check(op, t, _heat_pairs(ctx, op))
        doc["heat_ratios"] = {
            "t": report.t,
            "t_in_window": report.t_in_window,
            "separations": report.separations,
            "ratios": report.ratios,
        }

    if len(ctx.fields) == 2:
        other = ctx.operator(1)
        f = ctx.probes(op)[0]
        sigma = wt[: min(5, wt.size)]
        per_a = {}
        for a in ctx.cfg.exponents:
            per_a[str(a)] = heatflow_rigidity_probe(
                op, other, a, f, ctx.quad, sigma
            )
        doc["rigidity_probe"] = per_a

    ctx.outputs["diagnostics.json"] = dump_json(doc) + "\n"
    ctx.outputs["svals.csv"] = _csv(sval_rows, "report,index,value")


_SUITE_FNS = {
    "calibrate": _suite_calibrate,
    "assemble": _suite_assemble,
    "direct": _suite_direct,
    "reduce": _suite_reduce,
    "gauge": _suite_gauge,
    "diagnostics": _suite_diagnostics,
}


def list_suites() -> str:
    """One line per suite, in execution order."""
    return "\n".join(f"{name}: {SUITE_DESCRIPTIONS[name]}" for name in SUITE_NAMES)


def run_suites(
    cfg: ExperimentConfig,
    out_dir=None,
    suites=None,
    seed=None,
) -> RunResult:
    """Run the selected suites and write results under out_dir.

    Raises ConfigError for invalid suite selections and scenario
    construction failures; numeric contract violations are collected into
    the failure manifest instead.
    """
    selected = tuple(suites) if suites is not None else cfg.suites
    unknown = [s for s in selected if s not in SUITE_NAMES]
    if unknown:
        raise ConfigError(f"unknown suites: {', '.join(unknown)}")
    ordered = [s for s in SUITE_NAMES if s in selected]

    ctx = RunContext(cfg, cfg.seed if seed is None else int(seed))
    failures = []
    skipped = []
    abort = False
    for name in ordered:
        if abort:
            skipped.append(name)
            continue
        try:
            _SUITE_FNS[name](ctx)
        except (PositivityError, AssemblyError) as exc:
            failures.append(
                {"suite": name, "kind": type(exc).__name__, "message": str(exc)}
            )
            abort = True
        except (ContractError, ArithmeticError, ValueError, RuntimeError) as exc:
            failures.append(
                {"suite": name, "kind": type(exc).__name__, "message": str(exc)}
            )

    target = Path(out_dir if out_dir is not None else cfg.out_dir)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for fname in sorted(ctx.outputs):
        (target / fname).write_text(ctx.outputs[fname])
        written.append(fname)
    manifest = {
        "ok": not failures,
        "seed": ctx.seed,
        "suites_run": [s for s in ordered if s not in skipped],
        "suites_skipped": skipped,
        "failures": failures,
        "outputs": written,
    }
    (target / "manifest.json").write_text(dump_json(manifest) + "\n")
    written.append("manifest.json")
    return RunResult(
        ok=not failures,
        failures=failures,
        skipped=skipped,
        outputs=written,
        out_dir=target,
    )
