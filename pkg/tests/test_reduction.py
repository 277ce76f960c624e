"""Lifting nonlocal solutions to local boundary Cauchy data."""

import numpy as np
import pytest
import scipy.integrate

from conftest import hat_probes

from fracred.calculus import (
    QuadratureError,
    TimeQuadrature,
    apply_power,
    gamma_neg,
)
from fracred.dirichlet import solve_exterior_value
from fracred.operators import CoefficientField, assemble
from fracred.reduction import (
    LiftedPair,
    boundary_cauchy,
    boundary_gap,
    lift,
    moment_functional,
    theorem1_probe,
)


def first_probe_solution(scn, a=0.5):
    return solve_exterior_value(scn.op, a, hat_probes(scn)[0])


class TestLift:
    def test_residuals_within_contract(self, base1d):
        for a in (0.25, 0.5, 0.75):
            sol = first_probe_solution(base1d, a)
            pair = lift(base1d.op, a, sol)
            assert pair.residuals["phi"] < 1e-10
            assert pair.residuals["psi"] < 1e-9
            assert pair.residuals["interior"] < 1e-9

    def test_phi_solves_the_local_problem(self, base1d):
        sol = first_probe_solution(base1d)
        pair = lift(base1d.op, 0.5, sol)
        op = base1d.op
        res = np.linalg.norm(op.K @ pair.phi - op.M @ sol.u)
        assert res < 1e-10 * np.linalg.norm(op.M @ sol.u)

    def test_psi_is_the_shifted_power(self, base1d):
        sol = first_probe_solution(base1d)
        pair = lift(base1d.op, 0.5, sol)
        direct = apply_power(base1d.op, -0.5, sol.u)
        np.testing.assert_allclose(pair.psi, direct, rtol=1e-10)

    def test_rejects_mismatched_exponent(self, base1d):
        sol = first_probe_solution(base1d, 0.25)
        with pytest.raises(ValueError):
            lift(base1d.op, 0.5, sol)


class TestBoundaryCauchy:
    def test_linear_psi_has_unit_conormal_1d(self, base1d):
        # psi = x is harmonic, so the variational flux is the outward
        # normal derivative: -1 at the left interface point, +1 at the right
        op = base1d.op
        x = base1d.mesh.nodes[op.free_nodes].ravel()
        sol = first_probe_solution(base1d)
        fake = LiftedPair(phi=np.zeros_like(x), psi=x, source=sol, residuals={})
        bc = boundary_cauchy(op, fake, base1d.labels)
        order = np.argsort(base1d.mesh.nodes[bc.nodes].ravel())
        np.testing.assert_allclose(bc.conormal[order], [-1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(
            np.sort(base1d.mesh.nodes[bc.nodes].ravel()), [-1.0, 1.0]
        )

    def test_constant_psi_has_zero_conormal(self, base1d):
        op = base1d.op
        ones = np.ones(op.n_dofs)
        sol = first_probe_solution(base1d)
        fake = LiftedPair(phi=ones, psi=ones, source=sol, residuals={})
        bc = boundary_cauchy(op, fake, base1d.labels)
        assert np.abs(bc.conormal).max() < 1e-12
        assert np.all(bc.trace == 1.0)

    def test_linear_psi_flux_on_straight_edges_2d(self, base2d):
        # away from the corners the lifted flux approximates n_x = +-1
        op = base2d.op
        x = base2d.mesh.nodes[op.free_nodes][:, 0]
        sol = first_probe_solution(base2d)
        fake = LiftedPair(phi=np.zeros_like(x), psi=x, source=sol, residuals={})
        bc = boundary_cauchy(op, fake, base2d.labels)
        pts = base2d.mesh.nodes[bc.nodes]
        right = (np.abs(pts[:, 0] - 1.0) < 1e-9) & (np.abs(pts[:, 1]) <= 0.5)
        left = (np.abs(pts[:, 0] + 1.0) < 1e-9) & (np.abs(pts[:, 1]) <= 0.5)
        assert right.any() and left.any()
        np.testing.assert_allclose(bc.conormal[right], 1.0, atol=0.05)
        np.testing.assert_allclose(bc.conormal[left], -1.0, atol=0.05)

    def test_interface_mass_totals_the_perimeter_2d(self, base2d):
        # each P1 edge block ell/6 [[2, 1], [1, 2]] sums to ell, so the
        # whole interface mass sums to the patch perimeter
        from fracred.reduction import _boundary_edges, _boundary_mass

        _, B = _boundary_mass(base2d.op, base2d.labels)
        edges = _boundary_edges(base2d.mesh, base2d.labels)
        perimeter = sum(
            float(np.linalg.norm(base2d.mesh.nodes[n1] - base2d.mesh.nodes[n0]))
            for n0, n1 in edges
        )
        assert B.sum() == pytest.approx(perimeter, rel=1e-12)
        np.testing.assert_allclose(B, B.T)
        assert np.all(np.linalg.eigvalsh(B) > 0)

    def test_edge_block_entries_2d(self, base2d):
        from fracred.reduction import _boundary_edges, _boundary_mass

        op = base2d.op
        bd_dofs, B = _boundary_mass(op, base2d.labels)
        pos = {int(d): k for k, d in enumerate(bd_dofs)}
        n0, n1 = _boundary_edges(base2d.mesh, base2d.labels)[0]
        ell = float(np.linalg.norm(base2d.mesh.nodes[n1] - base2d.mesh.nodes[n0]))
        i, j = pos[int(op.node_to_dof[n0])], pos[int(op.node_to_dof[n1])]
        assert B[i, j] == pytest.approx(ell / 6.0, rel=1e-12)

    def test_flux_balance_is_exact(self, base2d):
        # sum_j (B g)_j = 1^T K_Omega psi = 0 because stiffness rows of a
        # fully interior patch annihilate constants
        from fracred.reduction import _boundary_mass

        op = base2d.op
        x = base2d.mesh.nodes[op.free_nodes][:, 0]
        sol = first_probe_solution(base2d)
        fake = LiftedPair(phi=np.zeros_like(x), psi=x, source=sol, residuals={})
        bc = boundary_cauchy(op, fake, base2d.labels)
        _, B = _boundary_mass(op, base2d.labels)
        assert abs((B @ bc.conormal).sum()) < 1e-12

    def test_gap_rejects_different_node_sets(self, base1d, base2d):
        s1 = first_probe_solution(base1d)
        b1 = boundary_cauchy(base1d.op, lift(base1d.op, 0.5, s1), base1d.labels)
        s2 = first_probe_solution(base2d)
        b2 = boundary_cauchy(base2d.op, lift(base2d.op, 0.5, s2), base2d.labels)
        with pytest.raises(ValueError):
            boundary_gap(b1, b2)


class TestTheoremProbe:
    def test_identical_operators_leave_no_gap(self, base1d):
        probes = hat_probes(base1d)[:4]
        rep = theorem1_probe(base1d.op, base1d.op, 0.5, probes, base1d.labels)
        assert rep["exterior_gap"] < 1e-10
        assert rep["boundary_gap"] < 1e-10
        assert len(rep["per_probe"]) == 4

    def test_zeroth_order_perturbation_regression(self, perturbed1d, base1d):
        # frozen from the first verified run: c = +5 inside Omega shifts
        # both readings of the data by a stable, visible amount
        probes = hat_probes(base1d)
        rep = theorem1_probe(
            perturbed1d.op1, perturbed1d.op2, 0.5, probes, perturbed1d.labels
        )
        assert rep["exterior_gap"] == pytest.approx(0.03792158926810607, rel=1e-9)
        assert rep["boundary_gap"] == pytest.approx(0.0981762934537036, rel=1e-9)
        assert rep["exterior_gap"] > 1e-6
        assert rep["boundary_gap"] > 1e-6

    def test_rejects_exterior_coefficient_mismatch(self, base1d):
        # same mesh, but c = 5 everywhere (not confined to Omega)
        field = CoefficientField.build(base1d.mesh, c=5.0)
        other = assemble(base1d.mesh, field)
        with pytest.raises(ValueError):
            theorem1_probe(
                base1d.op, other, 0.5, hat_probes(base1d)[:1], base1d.labels
            )

    def test_rejects_different_meshes(self, base1d, fine1d):
        with pytest.raises(ValueError):
            theorem1_probe(
                base1d.op, fine1d.op, 0.5, hat_probes(base1d)[:1], base1d.labels
            )


class TestMomentFunctional:
    def test_first_increment_moment_is_the_power(self, base1d, quad):
        op = base1d.op
        rng = np.random.default_rng(7)
        u = rng.standard_normal(op.n_dofs)
        nodes = base1d.labels.node_set("W")[:4]
        got = moment_functional(op, 0.5, u, 1, quad, nodes, increment=True)
        want = gamma_neg(0.5) * apply_power(op, 0.5, u)[op.dofs_of_nodes(nodes)]
        np.testing.assert_allclose(got, want, rtol=1e-9)

    def test_single_mode_matches_adaptive_quadrature(self, base1d, quad):
        # oracle: project onto one eigenvector, where the moment reduces to
        # the scalar integral of expm1(-lam t) t^(-1-a)
        op = base1d.op
        k = 3
        u = op.eigenvectors[:, k].copy()
        lam = float(op.eigenvalues[k])
        a = 0.5
        node = int(base1d.labels.node_set("W")[0])
        got = moment_functional(op, a, u, 1, quad, [node], increment=True)[0]
        fn = lambda t: np.expm1(-t * lam) * t ** (-1 - a)
        r1, _ = scipy.integrate.quad(fn, 0, 1 / lam, limit=400)
        r2, _ = scipy.integrate.quad(fn, 1 / lam, np.inf, limit=400)
        want = (r1 + r2) * u[op.dofs_of_nodes(node)[0]]
        assert got == pytest.approx(want, rel=1e-8)

    def test_bare_moment_diverges(self, base1d, quad):
        rng = np.random.default_rng(8)
        u = rng.standard_normal(base1d.op.n_dofs)
        nodes = base1d.labels.node_set("W")[:2]
        with pytest.raises(QuadratureError):
            moment_functional(base1d.op, 0.5, u, 1, quad, nodes, increment=False)

    def test_second_increment_moment_diverges(self, base1d, quad):
        # expm1 only buys one power of t, so m = 2 still blows up at t -> 0
        rng = np.random.default_rng(9)
        u = rng.standard_normal(base1d.op.n_dofs)
        nodes = base1d.labels.node_set("W")[:2]
        with pytest.raises(QuadratureError):
            moment_functional(base1d.op, 0.5, u, 2, quad, nodes, increment=True)

    def test_zero_vector_passes_the_detector(self, base1d, quad):
        nodes = base1d.labels.node_set("W")[:2]
        out = moment_functional(
            base1d.op, 0.5, np.zeros(base1d.op.n_dofs), 1, quad, nodes
        )
        np.testing.assert_array_equal(out, 0.0)

    def test_parameter_validation(self, base1d, quad):
        u = np.zeros(base1d.op.n_dofs)
        nodes = base1d.labels.node_set("W")[:1]
        with pytest.raises(ValueError):
            moment_functional(base1d.op, 0.5, u, 0, quad, nodes)
        with pytest.raises(ValueError):
            moment_functional(base1d.op, 1.5, u, 1, quad, nodes)
