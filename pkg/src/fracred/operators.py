"""P1 finite element assembly of self-adjoint second-order elliptic operators.

The operator has the sesquilinear form

    a(u, v) = int A grad(u) . grad(conj(v))
            + i int b . (u grad(conj(v)) - grad(u) conj(v))
            + int c u conj(v)

with per-element constant coefficients: A a symmetric positive matrix, b a
real vector (magnetic-type term), c a real scalar potential.  Integration is
exact for piecewise-linear basis functions and constant coefficients, the
mass matrix is consistent (never lumped), and homogeneous Dirichlet values
are eliminated on the outer box boundary.  Keeping the element integration
exact is what later makes mapped-mesh reassembly an entrywise matrix
identity rather than an approximation.

The stiffness matrix is Hermitian, real whenever b vanishes identically, and
the generalized eigendecomposition K Phi = M Phi diag(lambda) with
Phi^H M Phi = I is computed densely at assembly time.  Desk scale only
(a few thousand degrees of freedom).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .mesh import OMEGA, Mesh, RegionLabels

#: relative Hermitian-deviation tolerance for the assembled stiffness
HERMITIAN_TOL = 1e-12
#: relative eigenpair residual tolerance accepted from the dense solver
EIGEN_RESIDUAL_TOL = 1e-10


class CoefficientError(ValueError):
    """Coefficient data violates symmetry, ellipticity or support rules."""


class PositivityError(ValueError):
    """The assembled operator is not positive definite."""

    def __init__(self, lambda_min: float):
        self.lambda_min = lambda_min
        super().__init__(
            f"operator not positive definite: lambda_min = {lambda_min:.6e}"
        )


class AssemblyError(RuntimeError):
    """Dense eigensolver produced residuals beyond the accepted tolerance."""


@dataclass
class CoefficientField:
    """Per-element coefficients (A, b, c) with a declared ellipticity bound.

    Attributes
    ----------
    A : ndarray, shape (n_elements, dim, dim)
        Symmetric conductivity matrix per element.
    b : ndarray, shape (n_elements, dim)
        Real magnetic-type coefficient per element.
    c : ndarray, shape (n_elements,)
        Real potential per element.
    bound : float
        Declared ellipticity constant: both the largest eigenvalue of A and
        of A^{-1} must stay at or below this value on every element.
    labels : RegionLabels or None
        When present, coefficient support rules are enforced: A is the
        identity and b, c vanish on every element not tagged OMEGA.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    bound: float
    labels: RegionLabels | None = None

    @classmethod
    def build(
        cls,
        mesh: Mesh,
        labels: RegionLabels | None = None,
        A=None,
        b=None,
        c=None,
        bound: float | None = None,
    ) -> "CoefficientField":
        """Broadcast scalar or single-matrix inputs to per-element arrays.

        A may be None (identity), a scalar, a (dim, dim) matrix, or a full
        (n_elements, dim, dim) stack; b a (dim,) vector or stack; c a scalar
        or per-element array.  When labels are given, b and c inputs are
        applied on OMEGA elements only and A defaults to the identity off
        OMEGA unless a full stack overrides it.
        """
        ne, d = mesh.element_count, mesh.dim
        eye = np.broadcast_to(np.eye(d), (ne, d, d)).copy()
        if A is None:
            A_full = eye
        else:
            A_arr = np.asarray(A, dtype=float)
            if A_arr.ndim == 0:
                A_full = eye * A_arr
            elif A_arr.shape == (d, d):
                A_full = np.broadcast_to(A_arr, (ne, d, d)).copy()
            elif A_arr.shape == (ne, d, d):
                A_full = A_arr.copy()
            else:
                raise CoefficientError(f"bad A shape {A_arr.shape}")
            if labels is not None and A_arr.ndim in (0, 2):
                # scalar / single-matrix input applies on OMEGA only
                A_full_outside = eye.copy()
                A_full_outside[labels.omega_elements] = A_full[
                    labels.omega_elements
                ]
                A_full = A_full_outside
        b_full = np.zeros((ne, d))
        if b is not None:
            b_arr = np.asarray(b, dtype=float)
            target = labels.omega_elements if labels is not None else slice(None)
            b_full[target] = b_arr
        c_full = np.zeros(ne)
        if c is not None:
            c_arr = np.asarray(c, dtype=float)
            target = labels.omega_elements if labels is not None else slice(None)
            c_full[target] = c_arr
        if bound is None:
            bound = _observed_ellipticity(A_full)
        return cls(A=A_full, b=b_full, c=c_full, bound=float(bound), labels=labels)

    def validate(self, mesh: Mesh) -> None:
        ne, d = mesh.element_count, mesh.dim
        if self.A.shape != (ne, d, d):
            raise CoefficientError(
                f"A shape {self.A.shape} does not match mesh ({ne}, {d}, {d})"
            )
        if self.b.shape != (ne, d) or self.c.shape != (ne,):
            raise CoefficientError("b or c shape does not match mesh")
        ellipticity_check(self)
        if self.labels is not None:
            outside = np.setdiff1d(np.arange(ne), self.labels.omega_elements)
            eye = np.eye(d)
            if not np.all(self.A[outside] == eye):
                raise CoefficientError("A must be the identity off OMEGA")
            if np.any(self.b[outside] != 0) or np.any(self.c[outside] != 0):
                raise CoefficientError("b and c must vanish off OMEGA")


def _observed_ellipticity(A: np.ndarray) -> float:
    sym_dev = np.abs(A - np.swapaxes(A, 1, 2)).max()
    scale = max(np.abs(A).max(), 1.0)
    if sym_dev > 1e-12 * scale:
        raise CoefficientError(f"A asymmetric (max deviation {sym_dev:.3e})")
    eigs = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, 1, 2)))
    if eigs.min() <= 0:
        raise CoefficientError(
            f"A not positive definite (min eigenvalue {eigs.min():.3e})"
        )
    return float(max(eigs.max(), (1.0 / eigs).max()))


def ellipticity_check(coeffs: CoefficientField) -> float:
    """Largest of ||A||_2 and ||A^{-1}||_2 over all elements.

    Raises CoefficientError when A is asymmetric, not positive definite, or
    the observed constant exceeds the declared bound.
    """
    observed = _observed_ellipticity(coeffs.A)
    if observed > coeffs.bound * (1 + 1e-12):
        raise CoefficientError(
            f"observed ellipticity {observed:.6e} exceeds declared "
            f"bound {coeffs.bound:.6e}"
        )
    return observed


def _reference_gradients(dim: int) -> np.ndarray:
    # gradients of barycentric coordinates on the reference simplex
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    return np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def element_geometry(mesh: Mesh):
    """Measures and P1 basis gradients for every element.

    Returns
    -------
    measures : ndarray, shape (n_elements,)
    grads : ndarray, shape (n_elements, dim + 1, dim)
        grads[e, i] is the constant gradient of basis function i on
        element e.
    """
    pts = mesh.nodes[mesh.elements]
    measures = mesh.element_measures()
    if np.any(measures <= 0):
        raise ValueError("element with non-positive measure")
    if mesh.dim == 1:
        h = measures[:, None, None]
        grads = _reference_gradients(1)[None, :, :] / h
    else:
        # rows of J are the edge vectors; dX/dxi = J^T, so grad_x = J^{-1} grad_xi
        J = np.stack([pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]], axis=1)
        Jinv = np.linalg.inv(J)
        grads = np.einsum("id,edk->eik", _reference_gradients(2), np.swapaxes(Jinv, 1, 2))
    return measures, grads


def local_matrices(mesh: Mesh, coeffs: CoefficientField, mass_density=None):
    """Exact per-element stiffness and mass matrices.

    Returns (k_local, m_local) with shapes (n_elements, d+1, d+1); k_local is
    complex when any magnetic coefficient is nonzero, m_local always real.
    """
    d = mesh.dim
    measures, grads = element_geometry(mesh)
    nb = d + 1

    # principal part: |T| * g_i . A g_j
    k_loc = np.einsum("e,eik,ekl,ejl->eij", measures, grads, coeffs.A, grads)

    # potential and mass: consistent P1 simplex mass matrix
    unit_mass = (np.ones((nb, nb)) + np.eye(nb)) / ((nb) * (nb + 1))
    m_unit = measures[:, None, None] * unit_mass[None]
    k_loc = k_loc + coeffs.c[:, None, None] * m_unit

    if np.any(coeffs.b != 0):
        # magnetic term: i (|T|/(d+1)) b.(g_i - g_j), Hermitian by construction
        q = np.einsum("eik,ek->ei", grads, coeffs.b)
        diff = q[:, :, None] - q[:, None, :]
        k_loc = k_loc.astype(complex) + 1j * (measures / nb)[:, None, None] * diff

    density = np.ones(mesh.element_count) if mass_density is None else np.asarray(mass_density, dtype=float)
    if density.shape != (mesh.element_count,):
        raise ValueError(f"mass density shape {density.shape} mismatch")
    if np.any(density <= 0):
        raise ValueError("mass density must be positive")
    m_loc = density[:, None, None] * m_unit
    return k_loc, m_loc


def _scatter(mesh: Mesh, local: np.ndarray, dtype) -> np.ndarray:
    n = mesh.node_count
    nb = mesh.dim + 1
    full = np.zeros((n, n), dtype=dtype)
    el = mesh.elements
    for i in range(nb):
        for j in range(nb):
            np.add.at(full, (el[:, i], el[:, j]), local[:, i, j])
    return full


@dataclass
class DiscreteOperator:
    """Assembled operator with its dense generalized eigendecomposition.

    All nodal vectors downstream live on the free nodes (outer box boundary
    eliminated); ``free_nodes`` maps degree-of-freedom index to mesh node
    index and ``node_to_dof`` inverts it with -1 on constrained nodes.

    The instance is treated as immutable after assembly.  ``_cache`` holds
    idempotent derived matrices (fractional stiffness, factorizations);
    entries are write-once values of pure functions of the operator, so
    concurrent readers are safe.
    """

    mesh: Mesh
    coeffs: CoefficientField
    K: np.ndarray
    M: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    free_nodes: np.ndarray
    node_to_dof: np.ndarray
    mass_density: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_dofs(self) -> int:
        return self.K.shape[0]

    @property
    def labels(self) -> RegionLabels | None:
        return self.coeffs.labels

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.K)

    def dofs_of_nodes(self, nodes) -> np.ndarray:
        nodes = np.atleast_1d(np.asarray(nodes, dtype=np.intp))
        dofs = self.node_to_dof[nodes]
        if np.any(dofs < 0):
            bad = nodes[dofs < 0]
            raise ValueError(f"nodes {bad.tolist()} are constrained (box boundary)")
        return dofs

    def region_dofs(self, tag: str, labels: RegionLabels | None = None) -> np.ndarray:
        lab = labels if labels is not None else self.labels
        if lab is None:
            raise ValueError("operator has no region labels attached")
        nodes = lab.node_set(tag)
        free = nodes[self.node_to_dof[nodes] >= 0]
        return self.node_to_dof[free]

    def omega_interior_dofs(self, labels: RegionLabels | None = None) -> np.ndarray:
        lab = labels if labels is not None else self.labels
        if lab is None:
            raise ValueError("operator has no region labels attached")
        return self.dofs_of_nodes(lab.omega_interior_nodes)

    def boundary_omega_dofs(self, labels: RegionLabels | None = None) -> np.ndarray:
        lab = labels if labels is not None else self.labels
        if lab is None:
            raise ValueError("operator has no region labels attached")
        return self.dofs_of_nodes(lab.boundary_omega_nodes)

    def mass_inner(self, u, v):
        """M-weighted inner product, linear in u, conjugating v."""
        return np.vdot(v, self.M @ u)

    def mass_norm(self, v) -> float:
        return float(np.sqrt(max(self.mass_inner(v, v).real, 0.0)))

    def spectral_coefficients(self, v) -> np.ndarray:
        """Coordinates of v in the M-orthonormal eigenbasis."""
        return self.eigenvectors.conj().T @ (self.M @ v)

    def synthesize(self, coefficients) -> np.ndarray:
        return self.eigenvectors @ coefficients

    def cached(self, key, compute):
        if key not in self._cache:
            self._cache[key] = compute()
        return self._cache[key]


def assemble(
    mesh: Mesh,
    coeffs: CoefficientField,
    mass_density=None,
) -> DiscreteOperator:
    """Assemble (K, M) on the free nodes and attach the eigendecomposition.

    Parameters
    ----------
    mesh : Mesh
    coeffs : CoefficientField
        Validated before any numerics (symmetry, ellipticity bound, and,
        when labels are attached, coefficient support rules).
    mass_density : array_like, optional
        Positive per-element density for the mass matrix (weighted inner
        product); default 1.

    Raises
    ------
    PositivityError
        If the smallest generalized eigenvalue is not positive (potential
        too negative).
    AssemblyError
        If the dense eigensolver's residuals exceed EIGEN_RESIDUAL_TOL.
    """
    coeffs.validate(mesh)
    k_loc, m_loc = local_matrices(mesh, coeffs, mass_density)
    K_full = _scatter(mesh, k_loc, k_loc.dtype)
    M_full = _scatter(mesh, m_loc, float)

    boundary = mesh.boundary_nodes()
    free = np.setdiff1d(np.arange(mesh.node_count), boundary)
    node_to_dof = np.full(mesh.node_count, -1, dtype=np.intp)
    node_to_dof[free] = np.arange(free.size)
    K = K_full[np.ix_(free, free)]
    M = M_full[np.ix_(free, free)]

    herm_dev = np.abs(K - K.conj().T).max()
    if herm_dev >= HERMITIAN_TOL * np.abs(K).max():
        raise AssemblyError(f"stiffness not Hermitian: deviation {herm_dev:.3e}")

    vals, vecs = scipy.linalg.eigh(K, M)
    if vals[0] <= 0:
        raise PositivityError(float(vals[0]))

    # residual check: K phi_i = lambda_i M phi_i to 1e-10 lambda_i, with the
    # M-orthonormal column scaling the eigensolver already imposes
    R = K @ vecs - (M @ vecs) * vals
    rel = np.linalg.norm(R, axis=0) / vals
    if rel.max() > EIGEN_RESIDUAL_TOL:
        raise AssemblyError(f"eigenpair residual {rel.max():.3e} too large")

    density = None if mass_density is None else np.asarray(mass_density, dtype=float)
    return DiscreteOperator(
        mesh=mesh,
        coeffs=coeffs,
        K=K,
        M=M,
        eigenvalues=vals,
        eigenvectors=vecs,
        free_nodes=free,
        node_to_dof=node_to_dof,
        mass_density=density,
    )


#: group names used by operator_restriction_blocks, in storage order
BLOCK_GROUPS = ("OMEGA_INTERIOR", "OMEGA_BOUNDARY", "W", "WTILDE", "E", "OTHER")


@dataclass(frozen=True)
class RestrictionBlocks:
    """Disjoint dof groups and the corresponding sub-matrices of F(L)."""

    index: dict
    blocks: dict

    def assemble_full(self, n: int, dtype) -> np.ndarray:
        out = np.zeros((n, n), dtype=dtype)
        for (gi, gj), block in self.blocks.items():
            out[np.ix_(self.index[gi], self.index[gj])] = block
        return out


def operator_restriction_blocks(
    op: DiscreteOperator, labels: RegionLabels, F: np.ndarray
) -> RestrictionBlocks:
    """Partition a matrix function of the operator by region dof groups.

    The groups are OMEGA_INTERIOR, OMEGA_BOUNDARY, W, WTILDE, E and OTHER,
    derived from the priority node tags so they are disjoint and tile the
    full matrix.  F must be a dense (n_dofs, n_dofs) matrix computed from
    this operator.
    """
    F = np.asarray(F)
    n = op.n_dofs
    if F.shape != (n, n):
        raise ValueError(f"matrix shape {F.shape} does not match {n} dofs")

    tags = labels.node_tags[op.free_nodes]
    boundary_dofs = op.node_to_dof[
        labels.boundary_omega_nodes[
            op.node_to_dof[labels.boundary_omega_nodes] >= 0
        ]
    ]
    groups: dict[str, np.ndarray] = {}
    omega_dofs = np.flatnonzero(tags == OMEGA)
    groups["OMEGA_BOUNDARY"] = np.intersect1d(omega_dofs, boundary_dofs)
    groups["OMEGA_INTERIOR"] = np.setdiff1d(omega_dofs, boundary_dofs)
    for tag, name in (("W", "W"), ("WTILDE", "WTILDE"), ("E", "E")):
        groups[name] = np.flatnonzero(tags == tag)
    assigned = np.concatenate([groups[g] for g in BLOCK_GROUPS if g != "OTHER"])
    groups["OTHER"] = np.setdiff1d(np.arange(n), assigned)

    blocks = {
        (gi, gj): F[np.ix_(groups[gi], groups[gj])]
        for gi in BLOCK_GROUPS
        for gj in BLOCK_GROUPS
    }
    return RestrictionBlocks(index=groups, blocks=blocks)
