"""Pseudo-Euclidean geometry.

An S-space is R^d equipped with the indefinite bilinear form
S(x, y) = <x, S y> for a symmetric full-rank matrix S with m positive
eigenvalues (the index).  The scalar square S(x, x) may be negative.
The canonical frame is a congruence S = V^T U V with U = diag(+1... -1),
in which S-monotone sets become graphs of 1-Lipschitz functions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DimensionMismatch, SingularS
from .linalg import EigenResult, sym_eig

__all__ = ["SSpace", "CanonicalFrame", "make_sspace"]


class NearSingularWarning(UserWarning):
    """S has an eigenvalue within 10x of the rank tolerance."""


@dataclass(frozen=True)
class CanonicalFrame:
    """Congruence S = V^T U V with U the canonical +/-1 diagonal.

    The first ``m`` diagonal entries of U are +1, the rest -1.  Canonical
    coordinates of a point x are w = V x; scalar squares transform as
    S(x, x) = |w[:m]|^2 - |w[m:]|^2.
    """

    v: np.ndarray
    u_diag: np.ndarray
    m: int

    @cached_property
    def v_inv(self) -> np.ndarray:
        return np.linalg.inv(self.v)

    def to_canonical(self, x: np.ndarray) -> np.ndarray:
        return self.v @ x

    def from_canonical(self, w: np.ndarray) -> np.ndarray:
        return self.v_inv @ w


@dataclass(frozen=True)
class SSpace:
    """Validated S-space: the matrix, its inverse, signature, and spectrum."""

    s: np.ndarray
    d: int
    m: int
    s_inv: np.ndarray
    eigen: EigenResult
    tol: Tolerances = DEFAULT_TOLERANCES

    def _check_vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"expected a vector of dimension {self.d}, got {x.shape}")
        return x

    def bilinear(self, x, y) -> float:
        """S(x, y) = sum_ij x_i S_ij y_j; symmetric in (x, y)."""
        x = self._check_vector(x)
        y = self._check_vector(y)
        return float(x @ self.s @ y)

    def scalar_square(self, x) -> float:
        """S(x, x); the value may be negative."""
        x = self._check_vector(x)
        return float(x @ self.s @ x)

    def scalar_squares(self, xs: np.ndarray) -> np.ndarray:
        """Row-wise scalar squares of an (N, d) array."""
        xs = np.asarray(xs, dtype=float)
        return np.einsum("ij,jk,ik->i", xs, self.s, xs)

    @cached_property
    def frame(self) -> CanonicalFrame:
        """Canonical frame V = diag(sqrt|lambda|) W^T from S = W diag(lambda) W^T.

        Eigenvalues are ordered positives first (the descending eigen order
        does this for a full-rank S), which puts the +1 block of U first.
        """
        lam = self.eigen.values
        w = self.eigen.vectors
        v = np.diag(np.sqrt(np.abs(lam))) @ w.T
        u = np.where(lam > 0.0, 1.0, -1.0)
        return CanonicalFrame(v=v, u_diag=u, m=self.m)


def make_sspace(s, tol: Tolerances = DEFAULT_TOLERANCES) -> SSpace:
    """Validate S and compute its signature, inverse, and spectrum.

    Raises NotSymmetric for asymmetric input and SingularS when any
    eigenvalue sits at or below the rank tolerance (full rank is required).
    Eigenvalues within 10x of that tolerance trigger NearSingularWarning.
    """
    eig = sym_eig(s, tol=tol)
    s = np.asarray(s, dtype=float)
    s = 0.5 * (s + s.T)
    d = s.shape[0]
    scale = max(float(np.abs(eig.values).max()), 1e-300)
    small = np.abs(eig.values) <= tol.rank * scale
    if small.any():
        raise SingularS("S must have full rank: eigenvalue within the rank tolerance")
    if (np.abs(eig.values) <= 10.0 * tol.rank * scale).any():
        warnings.warn("S has an eigenvalue within 10x of the rank tolerance",
                      NearSingularWarning, stacklevel=2)
    m = int(np.sum(eig.values > 0.0))
    s_inv = eig.vectors @ np.diag(1.0 / eig.values) @ eig.vectors.T
    s_inv = 0.5 * (s_inv + s_inv.T)
    resid = float(np.linalg.norm(s @ s_inv - np.eye(d)))
    if resid > tol.eig * max(1.0, float(np.linalg.norm(s))):
        raise SingularS(f"inverse residual {resid:.3e} exceeds tolerance")
    return SSpace(s=s, d=d, m=m, s_inv=s_inv, eigen=eig, tol=tol)
