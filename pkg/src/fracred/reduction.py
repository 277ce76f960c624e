"""Reduction of nonlocal exterior data to local boundary Cauchy data.

From a nonlocal solution u the pair

    Phi = L^{-1} u,    Psi = L^a Phi = L^{a-1} u

is formed; Psi solves the local equation L Psi = L^a u, whose right side
vanishes on Omega-interior test functions by construction of u.  The
boundary Cauchy data of Psi on the interface of the Omega element patch
(trace and variational co-normal flux) is the local object the exterior
data reduces to; two operators with matching exterior coefficients can
then be compared probe by probe in both readings.

All interior-residual statements are weak: the assembled row (K Psi)_i
is the pairing of L Psi with the hat at dof i, and it is those pairings
over Omega-interior dofs that vanish (to roundoff) for a solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .calculus import QuadratureError, TimeQuadrature, apply_inverse, apply_power
from .dirichlet import CauchyPair, ExteriorData, NonlocalSolution, cauchy_gap, cauchy_pair, solve_exterior_value
from .mesh import RegionLabels
from .operators import DiscreteOperator, _scatter, local_matrices

#: invariant tolerances for the lifted pair
LIFT_TOL_PHI = 1e-10
LIFT_TOL_PSI = 1e-9
LIFT_TOL_INTERIOR = 1e-9


@dataclass(frozen=True)
class LiftedPair:
    """Phi = L^{-1} u and Psi = L^{a-1} u with their verified residuals.

    residuals keys: "phi" (relative ||K Phi - M u||), "psi" (relative gap
    to the direct L^{a-1} u), "interior" (max weak residual of L Psi on
    Omega-interior dofs, relative to the M-norm of u).
    """

    phi: np.ndarray
    psi: np.ndarray
    source: NonlocalSolution
    residuals: dict


def lift(op: DiscreteOperator, a: float, sol: NonlocalSolution) -> LiftedPair:
    """Build (Phi, Psi) from a nonlocal solution and verify the identities."""
    if sol.a != a:
        raise ValueError(f"solution was computed at a={sol.a}, not {a}")
    u = sol.u
    phi = apply_inverse(op, u)
    psi = apply_power(op, a, phi)

    r_phi = np.linalg.norm(op.K @ phi - op.M @ u) / np.linalg.norm(op.M @ u)
    direct = apply_power(op, a - 1.0, u)
    r_psi = np.linalg.norm(psi - direct) / np.linalg.norm(psi)
    interior = op.omega_interior_dofs()
    r_int = np.abs((op.K @ psi)[interior]).max() / op.mass_norm(u)

    residuals = {"phi": float(r_phi), "psi": float(r_psi), "interior": float(r_int)}
    if r_phi > LIFT_TOL_PHI or r_psi > LIFT_TOL_PSI or r_int > LIFT_TOL_INTERIOR:
        raise ArithmeticError(f"lift residuals out of contract: {residuals}")
    return LiftedPair(phi=phi, psi=psi, source=sol, residuals=residuals)


@dataclass(frozen=True)
class BoundaryCauchyData:
    """Trace and co-normal derivative on the Omega interface nodes."""

    nodes: np.ndarray
    trace: np.ndarray
    conormal: np.ndarray


def _omega_stiffness(op: DiscreteOperator, labels: RegionLabels) -> np.ndarray:
    """Stiffness assembled over OMEGA elements only (cached)."""

    def build():
        k_loc, _ = local_matrices(op.mesh, op.coeffs)
        keep = np.zeros(op.mesh.elements.shape[0], dtype=bool)
        keep[labels.omega_elements] = True
        k_loc = np.where(keep[:, None, None], k_loc, 0.0)
        full = _scatter(op.mesh, k_loc, k_loc.dtype)
        return full[np.ix_(op.free_nodes, op.free_nodes)]

    return op.cached("omega_stiffness", build)


def _boundary_edges(mesh, labels: RegionLabels) -> np.ndarray:
    """Edges of the OMEGA element patch that face a non-OMEGA element.

    An edge interior to the patch is shared by exactly two OMEGA
    triangles; interface edges appear once.
    """
    tris = mesh.elements[labels.omega_elements]
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


def _boundary_mass(op: DiscreteOperator, labels: RegionLabels):
    """Mass matrix of the Omega interface, and the interface dofs.

    In 1D the interface is two points and the natural pairing is the
    counting measure (identity); in 2D it is the P1 edge mass ell/6 *
    [[2, 1], [1, 2]] summed over interface edges.
    """

    def build():
        bd_dofs = op.boundary_omega_dofs(labels)
        if op.mesh.dim == 1:
            return bd_dofs, np.eye(bd_dofs.size)
        pos = {int(d): k for k, d in enumerate(bd_dofs)}
        B = np.zeros((bd_dofs.size, bd_dofs.size))
        for n0, n1 in _boundary_edges(op.mesh, labels):
            ell = float(np.linalg.norm(op.mesh.nodes[n1] - op.mesh.nodes[n0]))
            i = pos[int(op.node_to_dof[n0])]
            j = pos[int(op.node_to_dof[n1])]
            B[i, i] += ell / 3.0
            B[j, j] += ell / 3.0
            B[i, j] += ell / 6.0
            B[j, i] += ell / 6.0
        return bd_dofs, B

    return op.cached("omega_boundary_mass", build)


def boundary_cauchy(
    op: DiscreteOperator, pair: LiftedPair, labels: RegionLabels
) -> BoundaryCauchyData:
    """Boundary Cauchy data of Psi: trace and variational co-normal flux.

    The co-normal values g solve B g = r where r collects the Omega-side
    stiffness rows at interface dofs, r_j = (K_Omega Psi)_j, the standard
    variational flux lifting; B is the interface mass.
    """
    bd_dofs, B = _boundary_mass(op, labels)
    K_omega = _omega_stiffness(op, labels)
    r = (K_omega @ pair.psi)[bd_dofs]
    try:
        g = scipy.linalg.cho_factor(B)
    except scipy.linalg.LinAlgError as exc:
        raise ArithmeticError("degenerate interface mass matrix") from exc
    conormal = scipy.linalg.cho_solve(g, r)
    return BoundaryCauchyData(
        nodes=op.free_nodes[bd_dofs],
        trace=pair.psi[bd_dofs],
        conormal=conormal,
    )


def boundary_gap(one: BoundaryCauchyData, other: BoundaryCauchyData) -> float:
    """Max-norm distance between two boundary Cauchy data sets."""
    if not np.array_equal(one.nodes, other.nodes):
        raise ValueError("boundary data live on different node sets")
    return float(
        max(
            np.abs(one.trace - other.trace).max(),
            np.abs(one.conormal - other.conormal).max(),
        )
    )


def _check_shared_exterior(op1: DiscreteOperator, op2: DiscreteOperator, labels):
    if op1.mesh is not op2.mesh and not (
        np.array_equal(op1.mesh.nodes, op2.mesh.nodes)
        and np.array_equal(op1.mesh.elements, op2.mesh.elements)
    ):
        raise ValueError("operators do not share a mesh")
    outside = np.setdiff1d(
        np.arange(op1.mesh.elements.shape[0]), labels.omega_elements
    )
    c1, c2 = op1.coeffs, op2.coeffs
    if not (
        np.array_equal(c1.A[outside], c2.A[outside])
        and np.array_equal(c1.b[outside], c2.b[outside])
        and np.array_equal(c1.c[outside], c2.c[outside])
    ):
        raise ValueError("exterior coefficient mismatch")


def theorem1_probe(
    op1: DiscreteOperator,
    op2: DiscreteOperator,
    a: float,
    probes: list,
    labels: RegionLabels,
) -> dict:
    """Compare exterior Cauchy data and reduced boundary data per probe.

    Returns {"exterior_gap", "boundary_gap", "per_probe"} where the gaps
    are maxima over the probe list.  Requires both operators to share the
    mesh and all non-OMEGA element coefficients.
    """
    _check_shared_exterior(op1, op2, labels)
    per_probe = []
    ext_gap = 0.0
    bdy_gap = 0.0
    for f in probes:
        sol1 = solve_exterior_value(op1, a, f)
        sol2 = solve_exterior_value(op2, a, f)
        cp1 = cauchy_pair(op1, a, sol1, labels)
        cp2 = cauchy_pair(op2, a, sol2, labels)
        bc1 = boundary_cauchy(op1, lift(op1, a, sol1), labels)
        bc2 = boundary_cauchy(op2, lift(op2, a, sol2), labels)
        e = cauchy_gap(cp1, cp2)
        b = boundary_gap(bc1, bc2)
        per_probe.append({"exterior_gap": e, "boundary_gap": b})
        ext_gap = max(ext_gap, e)
        bdy_gap = max(bdy_gap, b)
    return {"exterior_gap": ext_gap, "boundary_gap": bdy_gap, "per_probe": per_probe}


def moment_functional(
    op: DiscreteOperator,
    a: float,
    u: np.ndarray,
    m: int,
    quad: TimeQuadrature,
    nodes,
    increment: bool = False,
) -> np.ndarray:
    """Time moments of the heat flow: sum_q w_q U(t_q, x) / t_q^{m+a}.

    With increment=True the evolved vector is (e^{-tL} - I) u instead of
    e^{-tL} u; at m = 1 that reproduces Gamma(-a) L^a u exactly (checked
    against the scalar calibration when m = 1).

    The bare moment diverges as t -> 0 unless u decays there (e.g. u is a
    difference of flows agreeing at t = 0); divergence is detected by the
    smallest-t quadrature nodes dominating the sum and raises
    QuadratureError.
    """
    if m < 1 or int(m) != m:
        raise ValueError(f"moment order must be a positive integer, got {m}")
    if not 0 < a < 1:
        raise ValueError(f"exponent must lie in (0, 1), got {a}")
    if increment and m == 1:
        quad.ensure_calibrated(op.lambda_min, op.lambda_max, a)
    dofs = op.dofs_of_nodes(np.asarray(nodes, dtype=int))
    coeff = op.spectral_coefficients(u)
    outer = np.multiply.outer(op.eigenvalues, quad.t)
    evol = np.expm1(-outer) if increment else np.exp(-outer)
    wt = quad.singular_weights(m + a)
    # per-node, per-time contributions before the final weighted sum
    contrib = (op.eigenvectors[dofs] @ (coeff[:, None] * evol)) * wt
    head = np.abs(contrib[:, :5]).max(axis=1)
    peak = np.abs(contrib).max(axis=1)
    diverging = head > 1e-3 * peak
    if np.any(diverging & (peak > 0)):
        worst = np.asarray(nodes, dtype=int)[diverging & (peak > 0)]
        raise QuadratureError(
            f"moment integral (m={m}, a={a}) diverges at t->0 at nodes "
            f"{worst.tolist()}: smallest-t nodes dominate the sum"
        )
    return contrib.sum(axis=1)
