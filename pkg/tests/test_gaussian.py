"""Covariance split, optimal linear map, and indefinite-metric PCA."""

import numpy as np
import pytest

from smot import AffineSubspace, decompose, make_sspace, pca_directions, rank_tol
from smot.errors import NotPositiveDefinite, ValidationError
from smot.linalg import sym_eig

from conftest import random_signature_matrix, random_spd


SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
LORENTZ = np.diag([1.0, -1.0])


def psd_min_eig(a):
    return float(np.linalg.eigvalsh(0.5 * (a + a.T)).min())


def split_conditions_hold(sp, dec, atol_scale=1e-9):
    """The defining matrix conditions for the covariance split."""
    s, sig = sp.s, dec.sigma
    scale = atol_scale * max(1.0, np.linalg.norm(sig)) * max(1.0, np.linalg.norm(s))
    assert np.linalg.norm(dec.q + dec.r - sig) <= 1e-10 * max(1.0, np.linalg.norm(sig))
    assert psd_min_eig(dec.q) >= -1e-9 * max(1.0, np.linalg.norm(dec.q))
    assert psd_min_eig(dec.r) >= -1e-9 * max(1.0, np.linalg.norm(dec.r))
    assert psd_min_eig(dec.q @ s @ dec.q) >= -scale
    assert psd_min_eig(-dec.r @ s @ dec.r) >= -scale
    assert np.linalg.norm(dec.q @ s @ dec.r) <= scale
    sig_inv = dec.sigma_inv
    assert np.linalg.norm(dec.q @ sig_inv @ dec.q - dec.q) <= scale
    assert np.linalg.norm(dec.r @ sig_inv @ dec.r - dec.r) <= scale
    assert np.linalg.norm(dec.q @ sig_inv @ dec.r) <= scale
    return True


def projector_conditions_hold(sp, dec, atol_scale=1e-9):
    """The defining conditions for the idempotent of the optimal map."""
    s, sig, p = sp.s, dec.sigma, dec.p
    d = sp.d
    scale = atol_scale * max(1.0, np.linalg.norm(sig)) * max(1.0, np.linalg.norm(s))
    assert np.linalg.norm(p @ p - p) <= scale
    assert np.linalg.norm(p @ sig - dec.q) <= scale
    sp_mat = s @ p
    assert np.linalg.norm(sp_mat - sp_mat.T) <= scale
    assert psd_min_eig(p @ sig) >= -scale
    assert psd_min_eig((np.eye(d) - p) @ sig) >= -scale
    assert psd_min_eig(sp_mat) >= -scale
    assert psd_min_eig(-s @ (np.eye(d) - p)) >= -scale
    gap = 0.5 * (s @ (2 * p - np.eye(d)) + (s @ (2 * p - np.eye(d))).T)
    assert psd_min_eig(gap) > 0.0
    return True


class TestDecompose:
    def test_lorentz_identity_covariance(self):
        sp = make_sspace(LORENTZ)
        dec = decompose(sp, np.eye(2))
        assert np.allclose(dec.q, np.diag([1.0, 0.0]), atol=1e-12)
        assert np.allclose(dec.r, np.diag([0.0, 1.0]), atol=1e-12)
        assert np.allclose(dec.p, np.diag([1.0, 0.0]), atol=1e-12)
        assert dec.primal_value == pytest.approx(0.5)

    def test_swap_identity_covariance(self):
        sp = make_sspace(SWAP)
        dec = decompose(sp, np.eye(2))
        half = 0.5 * np.ones((2, 2))
        assert np.allclose(dec.q, half, atol=1e-12)
        assert np.allclose(dec.r, np.array([[0.5, -0.5], [-0.5, 0.5]]), atol=1e-12)
        assert np.allclose(dec.p, half, atol=1e-12)
        assert dec.primal_value == pytest.approx(0.5)
        assert split_conditions_hold(sp, dec)

    def test_positive_definite_keeps_everything(self, rng):
        sp = make_sspace(random_signature_matrix(3, 3, rng))
        sigma = random_spd(3, rng)
        dec = decompose(sp, sigma)
        assert np.allclose(dec.q, sigma, atol=1e-10)
        assert np.allclose(dec.r, 0.0, atol=1e-10)
        assert np.allclose(dec.p, np.eye(3), atol=1e-10)

    def test_negative_definite_drops_everything(self, rng):
        sp = make_sspace(random_signature_matrix(3, 0, rng))
        sigma = random_spd(3, rng)
        dec = decompose(sp, sigma)
        assert np.allclose(dec.q, 0.0, atol=1e-10)
        assert np.allclose(dec.p, 0.0, atol=1e-10)
        assert dec.primal_value == pytest.approx(0.0, abs=1e-12)

    def test_rejects_singular_sigma(self):
        sp = make_sspace(LORENTZ)
        with pytest.raises(NotPositiveDefinite):
            decompose(sp, np.diag([1.0, 0.0]))

    def test_randomized_full_suite(self, rng):
        for _ in range(30):
            d = int(rng.integers(2, 7))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            sigma = random_spd(d, rng)
            dec = decompose(sp, sigma)
            assert split_conditions_hold(sp, dec)
            assert projector_conditions_hold(sp, dec)
            sigma_scale = float(np.linalg.norm(sigma, 2))
            assert rank_tol(dec.q, 1e-8, scale=sigma_scale) == m
            assert rank_tol(dec.r, 1e-8, scale=sigma_scale) == d - m
            expect = 0.5 * np.trace(sp.s @ dec.q)
            assert dec.primal_value == pytest.approx(expect, rel=1e-12, abs=1e-12)
            assert dec.dual_value == pytest.approx(dec.primal_value,
                                                   rel=1e-8, abs=1e-8)

    def test_uniqueness_under_permuted_eigen_order(self, rng):
        # The split selects by eigenvalue sign, not order: rebuilding it from
        # a shuffled congruent eigenbasis gives the same Q.
        from smot.linalg import spd_sqrt
        sp = make_sspace(random_signature_matrix(4, 2, rng))
        sigma = random_spd(4, rng)
        dec = decompose(sp, sigma)
        w = spd_sqrt(sigma)
        eig = sym_eig(w @ sp.s @ w)
        perm = rng.permutation(4)
        lam = eig.values[perm]
        u = eig.vectors[:, perm]
        v = w @ u
        q_perm = v @ np.diag((lam > 0).astype(float)) @ v.T
        assert np.linalg.norm(q_perm - dec.q) <= 1e-9 * max(1.0, np.linalg.norm(dec.q))


class TestPlanMap:
    def test_mean_is_fixed(self, rng):
        sp = make_sspace(random_signature_matrix(3, 1, rng))
        mean = rng.standard_normal(3)
        dec = decompose(sp, random_spd(3, rng), mean)
        assert np.allclose(dec.plan_map(mean), mean, atol=1e-12)

    def test_lorentz_projection(self):
        sp = make_sspace(LORENTZ)
        dec = decompose(sp, np.eye(2))
        assert np.allclose(dec.plan_map([3.0, 7.0]), [3.0, 0.0], atol=1e-12)

    def test_positive_definite_identity_map(self, rng):
        sp = make_sspace(random_signature_matrix(2, 2, rng))
        dec = decompose(sp, random_spd(2, rng))
        y = rng.standard_normal(2)
        assert np.allclose(dec.plan_map(y), y, atol=1e-10)

    def test_image_lies_in_affine_optimal_set(self, rng):
        # The map projects onto the affine set built from the idempotent,
        # and that set passes the strict affine-monotone validation.
        for _ in range(10):
            d = int(rng.integers(2, 6))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            dec = decompose(sp, random_spd(d, rng), rng.standard_normal(d))
            g = AffineSubspace(sp, dec.mean, dec.p)
            y = rng.standard_normal(d) * 2
            x = dec.plan_map(y)
            proj = g.project(y)[0]
            assert np.allclose(x, proj, atol=1e-9)
            assert g.contains(x)


class TestIndependentSplit:
    def test_lorentz_split(self):
        sp = make_sspace(LORENTZ)
        q_x, r_z = decompose(sp, np.eye(2)).independent_split()
        assert np.allclose(q_x, np.diag([1.0, 0.0]), atol=1e-12)
        assert np.allclose(r_z, np.diag([0.0, 1.0]), atol=1e-12)

    def test_swap_split(self):
        sp = make_sspace(SWAP)
        q_x, r_z = decompose(sp, np.eye(2)).independent_split()
        assert np.allclose(q_x, 0.5 * np.ones((2, 2)), atol=1e-12)
        assert np.allclose(r_z, [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)

    def test_adds_to_sigma_and_signs(self, rng):
        for _ in range(10):
            d = int(rng.integers(2, 6))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            sigma = random_spd(d, rng)
            dec = decompose(sp, sigma)
            q_x, r_z = dec.independent_split()
            assert np.allclose(q_x + r_z, sigma, atol=1e-9)
            # Scalar squares of the parts have the advertised signs.
            for _ in range(5):
                u = rng.standard_normal(d)
                x = q_x @ u  # in range(Q)
                z = r_z @ u
                assert sp.scalar_square(x) >= -1e-9 * (1 + u @ u)
                assert sp.scalar_square(z) <= 1e-9 * (1 + u @ u)

    def test_requires_zero_mean(self, rng):
        sp = make_sspace(LORENTZ)
        dec = decompose(sp, np.eye(2), np.array([1.0, 0.0]))
        with pytest.raises(ValidationError):
            dec.independent_split()


class TestPcaDirections:
    def test_lorentz_axes(self):
        sp = make_sspace(LORENTZ)
        pairs = pca_directions(sp, np.eye(2))
        lams = [lam for lam, _v in pairs]
        assert lams == pytest.approx([1.0, -1.0])
        assert np.allclose(np.abs(pairs[0][1]), [1.0, 0.0], atol=1e-12)

    def test_positive_definite_all_positive(self, rng):
        sp = make_sspace(random_signature_matrix(3, 3, rng))
        pairs = pca_directions(sp, random_spd(3, rng))
        assert all(lam > 0 for lam, _v in pairs)

    def test_swap_positive_direction(self):
        sp = make_sspace(SWAP)
        pairs = pca_directions(sp, np.eye(2))
        lam, v = pairs[0]
        assert lam == pytest.approx(1.0)
        assert np.allclose(np.abs(v / np.linalg.norm(v)),
                           [1 / np.sqrt(2)] * 2, atol=1e-12)

    def test_positive_span_is_range_q(self, rng):
        for _ in range(10):
            d = int(rng.integers(2, 6))
            m = int(rng.integers(0, d + 1))
            sp = make_sspace(random_signature_matrix(d, m, rng))
            sigma = random_spd(d, rng)
            dec = decompose(sp, sigma)
            pairs = pca_directions(sp, sigma)
            assert sum(lam > 0 for lam, _v in pairs) == m
            if m == 0:
                continue
            q_eig = sym_eig(dec.q)
            basis = q_eig.vectors[:, :m]  # range(Q), descending eigenvalues
            for lam, v in pairs:
                if lam <= 0:
                    continue
                v = v / np.linalg.norm(v)
                assert np.linalg.norm(v - basis @ (basis.T @ v)) <= 1e-8

    def test_generalized_eigen_equation(self, rng):
        # Each pair solves S v = lam Sigma^{-1} v.
        sp = make_sspace(random_signature_matrix(4, 2, rng))
        sigma = random_spd(4, rng)
        sig_inv = np.linalg.inv(sigma)
        for lam, v in pca_directions(sp, sigma):
            assert np.linalg.norm(sp.s @ v - lam * sig_inv @ v) <= 1e-8 * (1 + abs(lam))
