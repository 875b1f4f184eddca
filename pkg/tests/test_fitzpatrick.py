"""Fitzpatrick functions, projections, forward sets, extensions, conjugates."""

import math

import numpy as np
import pytest

from smot import (
    AffineSubspace,
    FiniteSet,
    is_s_monotone,
    is_strictly_monotone,
    make_sspace,
    mcshane_maximal_extension,
    psi_conjugate_at,
)
from smot.errors import (
    BoundaryPoint,
    CodomainTooLarge,
    EmptyProjection,
    NotMonotone,
    UnboundedBelow,
    ValidationError,
)

from conftest import random_signature_matrix


SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
LORENTZ = np.diag([1.0, -1.0])


def full_space(sp):
    return AffineSubspace(sp, np.zeros(sp.d), np.eye(sp.d))


def x_axis(sp):
    return AffineSubspace(sp, np.zeros(2), np.diag([1.0, 0.0]))


class TestPsi:
    def test_full_space_positive_definite(self):
        # With a positive-definite form the whole space is monotone and
        # psi(y) = S(y, y) / 2.
        sp = make_sspace(np.eye(2))
        ev = full_space(sp).psi([3.0, 4.0])
        assert ev.value == pytest.approx(12.5)

    def test_singleton_negative_definite(self):
        sp = make_sspace([[-1.0]])
        ev = FiniteSet(sp, [[1.0]]).psi([5.0])
        assert ev.value == pytest.approx(-4.5)

    def test_two_point_swap(self):
        sp = make_sspace(SWAP)
        g = FiniteSet(sp, [[0.0, 0.0], [1.0, 1.0]])
        ev = g.psi([2.0, 0.0])
        assert ev.value == pytest.approx(1.0)
        assert len(ev.maximizers) == 1
        assert np.allclose(ev.maximizers[0], [1.0, 1.0])

    def test_affine_strict_finite_everywhere(self, rng):
        sp = make_sspace(LORENTZ)
        g = x_axis(sp)
        for _ in range(20):
            y = rng.standard_normal(2) * 3
            ev = g.psi(y)
            assert ev.is_finite
            assert ev.value == pytest.approx(0.5 * y[0] ** 2, abs=1e-12)

    def test_null_line_infinite_off_diagonal(self):
        # The diagonal line in the Lorentz plane is maximal monotone but not
        # strict; psi is finite only on the line S((1,1), y - x0) = 0.
        sp = make_sspace(LORENTZ)
        g = AffineSubspace(sp, np.zeros(2), 0.5 * np.ones((2, 2)), validate=False)
        assert not g.psi([2.0, 0.0]).is_finite
        on_line = g.psi([2.0, 2.0])
        assert on_line.is_finite
        assert on_line.value == pytest.approx(0.0, abs=1e-12)


class TestPhi:
    def test_zero_on_the_set(self):
        sp = make_sspace(SWAP)
        g = FiniteSet(sp, [[0.0, 0.0], [1.0, 1.0]])
        assert g.phi([1.0, 1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_lorentz_x_axis(self):
        sp = make_sspace(LORENTZ)
        assert x_axis(sp).phi([0.0, 2.0]) == pytest.approx(-4.0)

    def test_full_space_identity_projection(self, rng):
        sp = make_sspace([[1.0]])
        g = full_space(sp)
        for y in rng.standard_normal(5):
            assert g.phi([y]) == pytest.approx(0.0, abs=1e-12)

    def test_identity_with_psi(self, rng):
        for _ in range(10):
            d = int(rng.integers(2, 5))
            m = int(rng.integers(1, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            pts = rng.standard_normal((4, d))
            keep = [pts[0]]
            for p in pts[1:]:
                if is_s_monotone(sp, keep + [p]):
                    keep.append(p)
            g = FiniteSet(sp, keep)
            y = rng.standard_normal(d)
            ev = g.psi(y)
            assert g.phi(y) == pytest.approx(sp.scalar_square(y) - 2 * ev.value,
                                             abs=1e-9 * (1 + abs(ev.value)))

    def test_unbounded_below(self):
        sp = make_sspace(LORENTZ)
        g = AffineSubspace(sp, np.zeros(2), 0.5 * np.ones((2, 2)), validate=False)
        with pytest.raises(UnboundedBelow):
            g.phi([2.0, 0.0])


class TestProject:
    def test_swap_diagonal_line(self):
        # Minimize 2 (2 - t)(0 - t) over the line (t, t): t = 1.
        sp = make_sspace(SWAP)
        g = AffineSubspace(sp, np.zeros(2), 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]]))
        pts = g.project([2.0, 0.0])
        assert len(pts) == 1
        assert np.allclose(pts[0], [1.0, 1.0], atol=1e-12)

    def test_point_of_set_projects_to_itself(self):
        sp = make_sspace(SWAP)
        g = FiniteSet(sp, [[0.0, 0.0], [1.0, 1.0]])
        pts = g.project([1.0, 1.0])
        assert any(np.allclose(p, [1.0, 1.0]) for p in pts)

    def test_lorentz_axis_formula(self):
        sp = make_sspace(LORENTZ)
        pts = x_axis(sp).project([3.0, 7.0])
        assert np.allclose(pts[0], [3.0, 0.0])

    def test_projection_attains_phi(self, rng):
        sp = make_sspace(random_signature_matrix(3, 2, rng))
        pts = rng.standard_normal((3, 3))
        keep = [pts[0]]
        for p in pts[1:]:
            if is_s_monotone(sp, keep + [p]):
                keep.append(p)
        g = FiniteSet(sp, keep)
        y = rng.standard_normal(3)
        phi = g.phi(y)
        for x in g.project(y):
            assert sp.scalar_square(x - y) == pytest.approx(
                phi, abs=1e-8 * (1 + y @ y))


class TestForwardSet:
    def test_own_point_always_member(self):
        sp = make_sspace(LORENTZ)
        g = x_axis(sp)
        x = np.array([1.0, 0.0])
        for eps in (1e-3, 0.5, 2.0):
            assert g.q_eps_membership(x, x, eps)

    def test_lorentz_vertical_fiber(self):
        sp = make_sspace(LORENTZ)
        g = x_axis(sp)
        assert g.q_eps_membership([0.0, 0.0], [0.0, 1.0], 1.0)

    def test_identity_projection_rejects(self):
        sp = make_sspace(np.eye(2))
        g = full_space(sp)
        assert not g.q_eps_membership([0.0, 0.0], [0.0, 1.0], 1.0)
        assert not g.q_eps_membership([0.0, 0.0], [0.0, 1.0], 1e-3)

    def test_requires_membership(self):
        sp = make_sspace(LORENTZ)
        with pytest.raises(ValidationError):
            x_axis(sp).q_eps_membership([0.0, 1.0], [0.0, 2.0], 1.0)


class TestMonotonicity:
    def test_classical_monotone_under_swap(self):
        # Swap-form monotonicity in the plane is classical monotonicity of
        # the underlying one-dimensional relation.
        sp = make_sspace(SWAP)
        assert is_s_monotone(sp, [[0.0, 0.0], [1.0, 1.0], [2.0, 3.0]])

    def test_antimonotone_pair_fails(self):
        sp = make_sspace(SWAP)
        assert not is_s_monotone(sp, [[0.0, 1.0], [1.0, 0.0]])

    def test_single_point(self):
        sp = make_sspace(SWAP)
        assert is_s_monotone(sp, [[5.0, -3.0]])
        assert is_strictly_monotone(sp, [[5.0, -3.0]])

    def test_strict_rejects_null_pairs(self):
        sp = make_sspace(LORENTZ)
        pts = [[0.0, 0.0], [1.0, 1.0]]
        assert is_s_monotone(sp, pts)
        assert not is_strictly_monotone(sp, pts)


class TestMcShane:
    def test_single_point_cone(self):
        sp = make_sspace(LORENTZ)
        g = mcshane_maximal_extension(sp, [[0.5, 0.25]], nodes_per_axis=101)
        for u in (-0.2, 0.0, 0.3, 0.9):
            assert g.f([u]) == pytest.approx(0.25 + abs(u - 0.5), abs=1e-12)

    def test_two_point_midpoint(self):
        sp = make_sspace(LORENTZ)
        g = mcshane_maximal_extension(sp, [[0.0, 0.0], [2.0, 0.0]])
        assert g.f([1.0]) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_non_monotone_input(self):
        sp = make_sspace(LORENTZ)
        with pytest.raises(NotMonotone):
            mcshane_maximal_extension(sp, [[0.0, 0.0], [0.5, 2.0]])

    def test_rejects_wide_codomain(self):
        sp = make_sspace(np.diag([1.0, -1.0, -1.0]))
        with pytest.raises(CodomainTooLarge):
            mcshane_maximal_extension(sp, [[0.0, 0.0, 0.0]])

    def test_grid_is_one_lipschitz_and_interpolates(self, rng):
        sp = make_sspace(LORENTZ)
        u = np.sort(rng.uniform(-2, 2, 4))
        f = np.cumsum(rng.uniform(-1, 1, 4) * np.diff(np.concatenate([[0], u])))
        pts = np.stack([u, f], axis=1)
        assert is_s_monotone(sp, pts)
        g = mcshane_maximal_extension(sp, pts, nodes_per_axis=401)
        du = np.abs(np.subtract.outer(g._nodes_u[:, 0], g._nodes_u[:, 0]))
        df = np.abs(np.subtract.outer(g._nodes_f, g._nodes_f))
        assert (df <= du + 1e-10).all()
        for ui, fi in zip(u, f):
            assert g.f([ui]) == pytest.approx(fi, abs=1e-12)
        assert is_s_monotone(sp, g._nodes_x)

    def test_graph_psi_on_canonical_swap_problem(self):
        # Monotone staircase in the Lorentz plane: psi at a nearby probe is
        # reachable by the grid search and lower-bounds the true value.
        sp = make_sspace(LORENTZ)
        pts = np.array([[-1.0, -0.5], [0.0, 0.0], [1.0, 0.5]])
        g = mcshane_maximal_extension(sp, pts)
        ev = g.psi([0.1, 0.05])
        assert ev.lower_bound
        assert ev.is_finite
        # Value at a set point is the half scalar square (membership).
        node = g.point_at([0.0])
        evn = g.psi(node)
        assert evn.value == pytest.approx(0.5 * sp.scalar_square(node), abs=1e-9)


class TestConjugate:
    def test_singleton_forced_mixture(self):
        sp = make_sspace(LORENTZ)
        x = np.array([1.0, 2.0])
        g = FiniteSet(sp, [x])
        val = psi_conjugate_at(sp, g, sp.s @ x)
        assert val == pytest.approx(0.5 * sp.scalar_square(x), abs=1e-10)

    def test_two_atom_interpolation(self):
        sp = make_sspace([[1.0]])
        g = FiniteSet(sp, [[0.0], [1.0]])
        assert psi_conjugate_at(sp, g, [0.5]) == pytest.approx(0.25, abs=1e-10)

    def test_outside_hull_infinite(self):
        sp = make_sspace([[1.0]])
        g = FiniteSet(sp, [[0.0], [1.0]])
        assert psi_conjugate_at(sp, g, [2.0]) == math.inf

    def test_fenchel_inequality_random(self, rng):
        for _ in range(10):
            d = int(rng.integers(1, 4))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            pts = rng.standard_normal((3, d))
            keep = [pts[0]]
            for p in pts[1:]:
                if is_s_monotone(sp, keep + [p]):
                    keep.append(p)
            g = FiniteSet(sp, keep)
            for x in keep:
                val = psi_conjugate_at(sp, g, sp.s @ np.asarray(x))
                assert val == pytest.approx(0.5 * sp.scalar_square(x), abs=1e-8)
            probe = rng.standard_normal(d)
            conj = psi_conjugate_at(sp, g, sp.s @ probe)
            if math.isfinite(conj):
                assert conj >= g.psi(probe).value - 1e-8


class TestSubdifferential:
    def test_lorentz_axis_gradient(self):
        sp = make_sspace(LORENTZ)
        res = x_axis(sp).subdifferential_interior([1.0, 5.0])
        assert len(res.generators) == 1
        assert np.allclose(res.generators[0], [1.0, 0.0], atol=1e-10)
        assert res.fd_rel_error < 1e-4

    def test_finite_set_unique_matches_fd(self, rng):
        sp = make_sspace(SWAP)
        g = FiniteSet(sp, [[0.0, 0.0], [1.0, 1.0], [2.0, 3.0]])
        res = g.subdifferential_interior([2.5, 0.3])
        if len(res.generators) == 1:
            assert res.fd_rel_error < 1e-4

    def test_point_of_set_generator(self):
        sp = make_sspace(np.eye(2))
        g = full_space(sp)
        y = np.array([0.7, -0.4])
        res = g.subdifferential_interior(y)
        assert np.allclose(res.generators[0], sp.s @ y, atol=1e-10)

    def test_boundary_raises(self):
        sp = make_sspace(LORENTZ)
        g = AffineSubspace(sp, np.zeros(2), 0.5 * np.ones((2, 2)), validate=False)
        with pytest.raises(BoundaryPoint):
            g.subdifferential_interior([1.0, 1.0])


class TestInvariants:
    """Probe suites for the structural inequalities."""

    def _random_maximal_sets(self, rng, d, m, sp):
        sets = []
        if m == d:
            sets.append(full_space(sp))
        if m == 0:
            sets.append(FiniteSet(sp, [rng.standard_normal(d)]))
        return sets

    def test_lower_bound_on_maximal_sets(self, rng):
        # psi dominates the half scalar square for maximal sets.
        checked = 0
        for _ in range(40):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            for g in self._random_maximal_sets(rng, d, m, sp):
                y = rng.standard_normal(d) * 2
                ev = g.psi(y)
                assert ev.value + 1e-9 * (1 + y @ y) >= 0.5 * sp.scalar_square(y)
                checked += 1
        assert checked >= 10

    def test_membership_on_set(self, rng):
        for _ in range(20):
            d = int(rng.integers(2, 5))
            m = int(rng.integers(1, d))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            pts = rng.standard_normal((4, d))
            keep = [pts[0]]
            for p in pts[1:]:
                if is_s_monotone(sp, keep + [p]):
                    keep.append(p)
            g = FiniteSet(sp, keep)
            for x in keep:
                x = np.asarray(x)
                assert abs(g.psi(x).value - 0.5 * sp.scalar_square(x)) \
                    <= 1e-9 * (1 + x @ x)

    def test_off_set_strictly_above(self, rng):
        # Perturbing a set point along an S-negative direction leaves the
        # monotone hull, where psi sits strictly above the half square.
        for _ in range(20):
            d = int(rng.integers(2, 5))
            m = int(rng.integers(1, d))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            point = rng.standard_normal(d)
            g = FiniteSet(sp, [point])
            neg_dir = sp.eigen.vectors[:, -1]  # most negative eigenvalue
            probe = point + 0.7 * neg_dir
            gap = g.psi(probe).value - 0.5 * sp.scalar_square(probe)
            assert gap > 0

    def test_midpoint_convexity(self, rng):
        for _ in range(20):
            d = int(rng.integers(1, 5))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            pts = rng.standard_normal((3, d))
            keep = [pts[0]]
            for p in pts[1:]:
                if is_s_monotone(sp, keep + [p]):
                    keep.append(p)
            g = FiniteSet(sp, keep)
            y1 = rng.standard_normal(d)
            y2 = rng.standard_normal(d)
            mid = g.psi(0.5 * (y1 + y2)).value
            assert mid <= 0.5 * g.psi(y1).value + 0.5 * g.psi(y2).value + 1e-9

    def test_measure_lower_bound_affine(self, rng):
        # Integrating psi of a maximal affine set against any finite
        # measure dominates the half scalar square of the mean.
        sp = make_sspace(LORENTZ)
        g = x_axis(sp)
        for _ in range(20):
            atoms = rng.standard_normal((int(rng.integers(1, 6)), 2))
            w = rng.random(atoms.shape[0]) + 0.05
            w = w / w.sum()
            mean = w @ atoms
            lhs = sum(wi * g.psi(a).value for wi, a in zip(w, atoms))
            assert lhs >= 0.5 * sp.scalar_square(mean) - 1e-9
