"""Nonlocal exterior-value problem for L^a and its exterior Cauchy data.

The discrete problem: given exterior data f supported on the window W,
find u with u = f outside the interior of Omega and B(u, w) = 0 for every
w supported on Omega-interior dofs, where B(u, w) = <L^a u, w>_M.  With
G the matrix of B this is the Schur solve G_II u_I = -G_IX f_X.

The measured data are the pair (u|_W, (L^a u)|_Wtilde).  Nodal flux values
are reported in the strong sense, i.e. entries of L^a u = M^{-1} G u; the
full data map assembled over a hat basis is offered both in that nodal
normalization and in the dual pairing (G u)|_Wtilde, which is the one that
is exactly Hermitian under W = Wtilde.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .calculus import apply_power, fractional_stiffness, power_matrix, sobolev_norm
from .mesh import RegionLabels
from .operators import DiscreteOperator

logger = logging.getLogger(__name__)

#: relative residual accepted from the interior Schur solve
SOLVE_TOL = 1e-10


class ExteriorDataError(ValueError):
    """Exterior datum not supported on the W window."""


@dataclass(frozen=True)
class ExteriorData:
    """Nodal vector supported on the W window (dof numbering).

    Attributes
    ----------
    values : ndarray
        Full dof-length vector; entries off ``w_dofs`` must vanish.
    w_dofs : ndarray
        Sorted dof indices of the W nodes.
    """

    values: np.ndarray
    w_dofs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        w_dofs = np.asarray(self.w_dofs, dtype=int)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "w_dofs", w_dofs)
        mask = np.ones(values.shape[0], dtype=bool)
        mask[w_dofs] = False
        if values.ndim != 1:
            raise ExteriorDataError("exterior datum must be a vector")
        if np.any(values[mask] != 0):
            raise ExteriorDataError("exterior datum has support outside W")

    @staticmethod
    def hat(op: DiscreteOperator, labels: RegionLabels, node: int) -> "ExteriorData":
        """Unit nodal hat at the given mesh node (must lie in W)."""
        w_dofs = op.region_dofs("W", labels)
        dof = op.dofs_of_nodes(node)[0]
        if dof not in w_dofs:
            raise ExteriorDataError(f"node {node} is not a W node")
        values = np.zeros(op.n_dofs)
        values[dof] = 1.0
        return ExteriorData(values, w_dofs)

    @staticmethod
    def from_node_values(
        op: DiscreteOperator, labels: RegionLabels, nodes, values
    ) -> "ExteriorData":
        """Datum with the given values at the given W mesh nodes."""
        w_dofs = op.region_dofs("W", labels)
        dofs = op.dofs_of_nodes(np.asarray(nodes, dtype=int))
        values = np.asarray(values)
        full = np.zeros(op.n_dofs, dtype=np.result_type(values, float))
        full[dofs] = values
        return ExteriorData(full, w_dofs)


@dataclass(frozen=True)
class NonlocalSolution:
    """Solution of the exterior-value problem together with its datum."""

    u: np.ndarray
    data: ExteriorData
    a: float
    residual: float


@dataclass(frozen=True)
class CauchyPair:
    """Exterior partial Cauchy data (u|_W, (L^a u)|_Wtilde)."""

    w_nodes: np.ndarray
    trace_W: np.ndarray
    wtilde_nodes: np.ndarray
    flux_Wtilde: np.ndarray
    a: float


def _interior_split(op: DiscreteOperator, labels: RegionLabels):
    interior = op.omega_interior_dofs(labels)
    rest = np.setdiff1d(np.arange(op.n_dofs), interior)
    return interior, rest


def _interior_cholesky(op: DiscreteOperator, a: float, labels: RegionLabels):
    """Cached Cholesky factor of G_II; failure would flag a non-PD block."""
    interior, _ = _interior_split(op, labels)
    G = fractional_stiffness(op, a)

    def build():
        try:
            return scipy.linalg.cho_factor(G[np.ix_(interior, interior)])
        except scipy.linalg.LinAlgError as exc:
            raise ArithmeticError(
                f"interior block of L^{a} not positive definite"
            ) from exc

    return op.cached(("gii_cholesky", a), build)


def solve_exterior_value(
    op: DiscreteOperator, a: float, f: ExteriorData
) -> NonlocalSolution:
    """Solve B(u, w) = 0 on Omega-interior dofs with u = f elsewhere."""
    labels = _require_labels(op)
    if f.values.shape[0] != op.n_dofs:
        raise ExteriorDataError("datum length does not match operator")
    interior, _ = _interior_split(op, labels)
    G = fractional_stiffness(op, a)
    factor = _interior_cholesky(op, a, labels)

    rhs = -(G @ f.values)[interior]
    u = np.array(f.values, dtype=np.result_type(f.values, G.dtype))
    u[interior] = scipy.linalg.cho_solve(factor, rhs)

    res = np.linalg.norm(G[np.ix_(interior, interior)] @ u[interior] - rhs)
    scale = np.linalg.norm(rhs)
    residual = float(res / scale) if scale > 0 else float(res)
    if residual > SOLVE_TOL:
        raise ArithmeticError(f"interior solve residual {residual:.3e} too large")
    return NonlocalSolution(u=u, data=f, a=a, residual=residual)


def dirichlet_energy(op: DiscreteOperator, a: float, u: np.ndarray) -> float:
    """B(u, u) = <L^a u, u>_M, real for Hermitian G."""
    return float(np.vdot(u, fractional_stiffness(op, a) @ u).real)


def stability_constant(op: DiscreteOperator, a: float) -> float:
    """C = 1 + ||G_II^{-1} G_IX||_2, the measured solve amplification."""
    labels = _require_labels(op)
    interior, rest = _interior_split(op, labels)
    G = fractional_stiffness(op, a)
    factor = _interior_cholesky(op, a, labels)
    X = scipy.linalg.cho_solve(factor, G[np.ix_(interior, rest)])
    c = 1.0 + float(np.linalg.norm(X, 2))
    logger.info("stability constant at a=%s: %.6g", a, c)
    return c


def solution_stability(op: DiscreteOperator, a: float, sol: NonlocalSolution) -> float:
    """Measured ratio ||u||_a / ||f||_a for one solve."""
    return sobolev_norm(op, a, sol.u) / sobolev_norm(op, a, sol.data.values)


def cauchy_pair(
    op: DiscreteOperator, a: float, sol: NonlocalSolution, labels: RegionLabels
) -> CauchyPair:
    """Extract (u|_W, (L^a u)|_Wtilde), flux in the strong nodal sense."""
    if op.labels is None or not labels.matches(op.labels):
        raise ValueError("labels do not belong to this operator")
    if sol.a != a:
        raise ValueError(f"solution was computed at a={sol.a}, not {a}")
    w_dofs = op.region_dofs("W", labels)
    wt_dofs = op.region_dofs("WTILDE", labels)
    flux = apply_power(op, a, sol.u)
    pair = CauchyPair(
        w_nodes=op.free_nodes[w_dofs],
        trace_W=sol.u[w_dofs],
        wtilde_nodes=op.free_nodes[wt_dofs],
        flux_Wtilde=flux[wt_dofs],
        a=a,
    )
    if not (np.all(np.isfinite(pair.trace_W)) and np.all(np.isfinite(pair.flux_Wtilde))):
        raise ArithmeticError("non-finite Cauchy data")
    return pair


def cauchy_gap(one: CauchyPair, other: CauchyPair) -> float:
    """Max-norm distance between two Cauchy pairs on matching windows."""
    if not (
        np.array_equal(one.w_nodes, other.w_nodes)
        and np.array_equal(one.wtilde_nodes, other.wtilde_nodes)
    ):
        raise ValueError("Cauchy pairs live on different windows")
    return float(
        max(
            np.abs(one.trace_W - other.trace_W).max(),
            np.abs(one.flux_Wtilde - other.flux_Wtilde).max(),
        )
    )


@dataclass(frozen=True)
class ExteriorDataMatrix:
    """Discrete partial Cauchy data organized as a W -> Wtilde linear map.

    ``matrix[k, j]`` is the flux response at Wtilde node ``wtilde_nodes[k]``
    to the unit hat at W node ``w_nodes[j]``.
    """

    matrix: np.ndarray
    w_nodes: np.ndarray
    wtilde_nodes: np.ndarray
    a: float
    flux: str = field(default="dual")


def exterior_data_matrix(
    op: DiscreteOperator,
    a: float,
    labels: RegionLabels,
    flux: str = "dual",
) -> ExteriorDataMatrix:
    """Column j = flux response to the j-th W nodal hat.

    flux="dual" reports rows of G u (the pairing <L^a u, hat_k>_M), which
    is Hermitian for W = Wtilde by self-adjointness; flux="nodal" reports
    strong values of L^a u as cauchy_pair does.  M^{-1} mixes rows across
    the window boundary, so the nodal variant is not exactly Hermitian.
    """
    if flux not in ("dual", "nodal"):
        raise ValueError(f"unknown flux normalization {flux!r}")
    if op.labels is None or not labels.matches(op.labels):
        raise ValueError("labels do not belong to this operator")
    interior, _ = _interior_split(op, labels)
    w_dofs = op.region_dofs("W", labels)
    wt_dofs = op.region_dofs("WTILDE", labels)
    G = fractional_stiffness(op, a)
    factor = _interior_cholesky(op, a, labels)

    # block solve against every W hat at once
    U = np.zeros((op.n_dofs, w_dofs.size), dtype=G.dtype)
    U[w_dofs, np.arange(w_dofs.size)] = 1.0
    U[interior] = scipy.linalg.cho_solve(factor, -G[np.ix_(interior, w_dofs)])

    if flux == "dual":
        responses = (G @ U)[wt_dofs]
    else:
        responses = (power_matrix(op, a) @ U)[wt_dofs]
    if not np.any(responses != 0):
        raise ArithmeticError("exterior data map vanished; windows decoupled")
    return ExteriorDataMatrix(
        matrix=responses,
        w_nodes=op.free_nodes[w_dofs],
        wtilde_nodes=op.free_nodes[wt_dofs],
        a=a,
        flux=flux,
    )


def _require_labels(op: DiscreteOperator) -> RegionLabels:
    labels = op.labels
    if labels is None:
        raise ValueError("operator was assembled without region labels")
    return labels
