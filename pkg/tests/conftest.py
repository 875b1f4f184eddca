"""Shared generators for randomized suites.

All randomness is seeded through numpy Generators so failures reproduce.
"""

import numpy as np
import pytest

from smot import make_sspace


def random_orthogonal(d, rng):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def random_signature_matrix(d, m, rng, lo=0.4, hi=3.0):
    """Random symmetric full-rank matrix with exactly m positive eigenvalues."""
    w = random_orthogonal(d, rng)
    mags = rng.uniform(lo, hi, d)
    signs = np.array([1.0] * m + [-1.0] * (d - m))
    s = w @ np.diag(signs * mags) @ w.T
    return 0.5 * (s + s.T)


def random_spd(d, rng, lo=0.3, hi=3.0):
    w = random_orthogonal(d, rng)
    s = w @ np.diag(rng.uniform(lo, hi, d)) @ w.T
    return 0.5 * (s + s.T)


def random_sspace(d, m, rng):
    return make_sspace(random_signature_matrix(d, m, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
