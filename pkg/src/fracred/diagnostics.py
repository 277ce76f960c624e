"""Quantitative probes of injectivity, density, and heat-kernel structure.

These diagnostics turn qualitative continuum statements into measured
finite-dimensional quantities:

* ucp_quotient: singular values of v -> (v|_Sigma, (L^a v)|_Sigma) over
  the unit M-sphere; a positive smallest value is the discrete shadow of
  unique continuation (vanishing data forces the zero vector).
* runge_rank: singular values of the exterior-control map f on W ->
  (L^a u_f)|_E; full row rank mirrors the Runge density claim.
* heat_bound_check: ratio of the discrete heat kernel to the free
  Gaussian in the window where the comparison is meaningful.
* heatflow_rigidity_probe: the time-moment of a difference of heat flows
  against t^{-1-a}, cross-checked against the spectral flux gap.

Values are reported, not asserted, except where a contract is stated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .calculus import (
    TimeQuadrature,
    apply_power,
    fractional_stiffness,
    gamma_neg,
    heat_kernel_entry,
    min_element_diameter,
    power_matrix,
)
from .dirichlet import _interior_cholesky
from .mesh import OMEGA, RegionLabels
from .operators import DiscreteOperator
from .reduction import _check_shared_exterior

logger = logging.getLogger(__name__)

#: relative singular-value threshold for rank decisions
RANK_TOL = 1e-10


@dataclass(frozen=True)
class SingularValueReport:
    """Descending singular values of a described linear map."""

    singular_values: np.ndarray
    shape: tuple
    tag: str

    def __post_init__(self):
        sv = np.asarray(self.singular_values, dtype=float)
        if sv.size and (np.any(sv < 0) or np.any(np.diff(sv) > 0)):
            raise ValueError("singular values must be non-negative, descending")
        object.__setattr__(self, "singular_values", sv)

    @property
    def smallest(self) -> float:
        return float(self.singular_values[-1])

    @property
    def largest(self) -> float:
        return float(self.singular_values[0])

    @property
    def full_row_rank(self) -> bool:
        rows = self.shape[0]
        sv = self.singular_values
        return sv.size >= rows and sv[rows - 1] > RANK_TOL * sv[0]

    def dominates(self, other: "SingularValueReport") -> bool:
        """Every shared-index singular value at least matches ``other``'s.

        This is the monotonicity a row extension actually provides: adding
        data rows raises each sigma_k at fixed k.  Comparing the maps'
        respective smallest values instead would mix different indices and
        can go either way.
        """
        k = min(self.singular_values.size, other.singular_values.size)
        slack = 1e-13 * max(self.largest, other.largest)
        return bool(np.all(self.singular_values[:k] >= other.singular_values[:k] - slack))


def _mass_sphere_whitener(op: DiscreteOperator) -> np.ndarray:
    """Cached L^{-T} with M = L L^T: maps the unit 2-sphere to the M-sphere."""

    def build():
        L = scipy.linalg.cholesky(op.M, lower=True)
        return scipy.linalg.solve_triangular(
            L.T, np.eye(op.n_dofs), lower=False
        )

    return op.cached("mass_sphere_whitener", build)


def ucp_quotient(
    op: DiscreteOperator, a: float, sigma_nodes
) -> SingularValueReport:
    """Singular values of v -> (v|_Sigma, (L^a v)|_Sigma), v on the M-sphere.

    A strictly positive smallest singular value certifies that no nonzero
    vector has vanishing value and flux data on Sigma.  Sigma should live
    outside OMEGA; overlap is tolerated (the quotient is still well defined,
    e.g. for the full-restriction sanity check) but logged.
    """
    sigma = np.atleast_1d(np.asarray(sigma_nodes, dtype=int))
    if sigma.size == 0:
        raise ValueError("empty Sigma")
    labels = op.labels
    if labels is not None and np.any(labels.node_tags[sigma] == OMEGA):
        logger.warning("ucp_quotient: Sigma meets OMEGA (%d nodes)",
                       int(np.sum(labels.node_tags[sigma] == OMEGA)))
    dofs = op.dofs_of_nodes(sigma)
    Pa = power_matrix(op, a)
    W = _mass_sphere_whitener(op)
    stacked = np.vstack([W[dofs], (Pa @ W)[dofs]])
    svals = scipy.linalg.svdvals(stacked)
    return SingularValueReport(
        singular_values=svals,
        shape=stacked.shape,
        tag=f"ucp a={a} |Sigma|={sigma.size}",
    )


def runge_rank(
    op: DiscreteOperator, a: float, labels: RegionLabels
) -> SingularValueReport:
    """Singular values of the map (f on W hats) -> (L^a u_f) at E dofs.

    Full row rank is the discrete form of the density of reachable flux
    data on E.  The row-rank claim is only meaningful when |E| <= |W|;
    for larger E the report still carries the spectrum.
    """
    if np.intersect1d(labels.w_nodes, labels.e_nodes).size:
        raise ValueError("W and E overlap")
    w_dofs = op.region_dofs("W", labels)
    e_dofs = op.region_dofs("E", labels)
    if w_dofs.size == 0 or e_dofs.size == 0:
        raise ValueError("empty W or E window")
    interior = op.omega_interior_dofs(labels)
    G = fractional_stiffness(op, a)
    factor = _interior_cholesky(op, a, labels)
    U = np.zeros((op.n_dofs, w_dofs.size), dtype=G.dtype)
    U[w_dofs, np.arange(w_dofs.size)] = 1.0
    U[interior] = scipy.linalg.cho_solve(factor, -G[np.ix_(interior, w_dofs)])
    R = (power_matrix(op, a) @ U)[e_dofs]
    svals = scipy.linalg.svdvals(R)
    report = SingularValueReport(
        singular_values=svals,
        shape=R.shape,
        tag=f"runge a={a} |E|={e_dofs.size} |W|={w_dofs.size}",
    )
    logger.info(
        "runge map %s: smin/smax = %.3e", report.tag, report.smallest / report.largest
    )
    return report


@dataclass(frozen=True)
class HeatRatioReport:
    """Discrete-to-Gaussian heat kernel ratios at node pairs."""

    t: float
    pairs: np.ndarray
    separations: np.ndarray
    discrete: np.ndarray
    gaussian: np.ndarray
    ratios: np.ndarray
    edge_distances: np.ndarray
    t_in_window: bool


def heat_bound_check(
    op_neglap: DiscreteOperator, t: float, node_pairs
) -> HeatRatioReport:
    """Ratios of the discrete heat kernel to (4 pi t)^{-n/2} e^{-r^2/4t}.

    The operator must be the plain Laplacian assembly (A = I, b = 0,
    c = 0, unweighted mass): the Gaussian is only the right comparison
    there.  The window requirement h^2 << t << box^2 is reported via
    t_in_window (and logged when violated), not asserted.
    """
    coeffs = op_neglap.coeffs
    d = op_neglap.mesh.dim
    eye = np.eye(d)
    if (
        np.any(coeffs.A != eye)
        or np.any(coeffs.b != 0)
        or np.any(coeffs.c != 0)
        or op_neglap.mass_density is not None
    ):
        raise ValueError("heat bound check requires the plain -Laplace operator")
    if t <= 0:
        raise ValueError(f"time must be positive, got {t}")

    h = min_element_diameter(op_neglap.mesh)
    box = op_neglap.mesh.box
    box_span = float((box[:, 1] - box[:, 0]).min())
    in_window = (t >= 4.0 * h**2) and (t <= (box_span / 4.0) ** 2)
    if not in_window:
        logger.warning(
            "t=%.3g outside the validity window [%.3g, %.3g]",
            t,
            4.0 * h**2,
            (box_span / 4.0) ** 2,
        )

    pairs = np.atleast_2d(np.asarray(node_pairs, dtype=int))
    nodes = op_neglap.mesh.nodes
    sep = np.linalg.norm(nodes[pairs[:, 0]] - nodes[pairs[:, 1]], axis=1)
    disc = np.array(
        [
            float(heat_kernel_entry(op_neglap, t, int(x), int(z)).real)
            for x, z in pairs
        ]
    )
    gauss = (4.0 * math.pi * t) ** (-d / 2.0) * np.exp(-(sep**2) / (4.0 * t))
    edge = np.minimum(
        (nodes[pairs[:, 0]] - box[:, 0]).min(axis=1),
        (box[:, 1] - nodes[pairs[:, 0]]).min(axis=1),
    )
    edge = np.minimum(
        edge,
        np.minimum(
            (nodes[pairs[:, 1]] - box[:, 0]).min(axis=1),
            (box[:, 1] - nodes[pairs[:, 1]]).min(axis=1),
        ),
    )
    return HeatRatioReport(
        t=float(t),
        pairs=pairs,
        separations=sep,
        discrete=disc,
        gaussian=gauss,
        ratios=disc / gauss,
        edge_distances=edge,
        t_in_window=in_window,
    )


def heatflow_rigidity_probe(
    op1: DiscreteOperator,
    op2: DiscreteOperator,
    a: float,
    f,
    quad: TimeQuadrature,
    sigma_nodes,
) -> float:
    """Max over Sigma of |sum_q w_q (U1 - U2)(x, t_q) t_q^{-1-a}|.

    U_i is the heat flow of the exterior datum under op_i.  The value must
    equal |Gamma(-a)| times the spectral flux gap |(L1^a - L2^a) f| at the
    same nodes (both are quadratures of the same increments), verified
    here to 1e-8 relative; identical operators give zero.
    """
    labels = op1.labels
    if labels is None:
        raise ValueError("operator was assembled without region labels")
    _check_shared_exterior(op1, op2, labels)

    quad.ensure_calibrated(
        min(op1.lambda_min, op2.lambda_min), max(op1.lambda_max, op2.lambda_max), a
    )
    sigma = np.atleast_1d(np.asarray(sigma_nodes, dtype=int))
    support_nodes = op1.free_nodes[np.flatnonzero(f.values)]
    # closure of the support: every node sharing an element with it
    el = op1.mesh.elements
    touching = el[np.isin(el, support_nodes).any(axis=1)]
    closure = np.unique(touching)
    if np.intersect1d(sigma, closure).size:
        raise ValueError("Sigma closure meets the datum support")

    wt = quad.singular_weights(1.0 + a)
    vals = []
    for op in (op1, op2):
        dofs = op.dofs_of_nodes(sigma)
        coeff = op.spectral_coefficients(f.values)
        evol = np.expm1(-np.multiply.outer(op.eigenvalues, quad.t))
        vals.append((op.eigenvectors[dofs] @ (coeff[:, None] * evol)) @ wt)
    probe = np.abs(vals[0] - vals[1])
    value = float(probe.max())

    flux1 = apply_power(op1, a, f.values)
    flux2 = apply_power(op2, a, f.values)
    d1 = op1.dofs_of_nodes(sigma)
    d2 = op2.dofs_of_nodes(sigma)
    spectral = abs(gamma_neg(a)) * float(np.abs(flux1[d1] - flux2[d2]).max())
    scale = max(value, spectral, 1e-30)
    if abs(value - spectral) > 1e-8 * scale:
        raise ArithmeticError(
            f"rigidity probe {value:.6e} disagrees with spectral gap "
            f"{spectral:.6e}"
        )
    return value
