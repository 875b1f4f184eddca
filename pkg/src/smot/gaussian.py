"""Closed-form solution for Gaussian targets.

For a positive-definite covariance Sigma there is a unique pair of
symmetric positive semi-definite matrices Q, R with

    Sigma = Q + R,   Q S Q >= 0,   R S R <= 0,   Q S R = 0,

splitting Y = X + Z into independent Gaussians supported on complementary
positive and negative subspaces of the S-space.  P = Q Sigma^{-1} is the
unique idempotent with P Sigma and S P symmetric, P Sigma >= 0,
(I - P) Sigma >= 0, S P >= 0, S (I - P) <= 0, and the optimal plan is the
law of (mean + P (Y - mean), Y).  The split is computed by simultaneous
diagonalization: with W = sqrt(Sigma) and W S W = U diag(lam) U^T, the
columns of V = W U satisfy V^T S V = diag(lam) and V^T Sigma^{-1} V = I,
and Q collects the positive-lam block.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    DimensionMismatch,
    NotPositiveDefinite,
    SignatureMismatch,
    ValidationError,
)
from .linalg import spd_sqrt, sym_eig
from .sspace import SSpace

__all__ = ["GaussianDecomposition", "decompose", "pca_directions"]


@dataclass(frozen=True)
class GaussianDecomposition:
    """The matrices of the positive/negative covariance split.

    ``primal_value`` and ``dual_value`` are the centered optimal values
    (mean contribution excluded): both equal trace(S Q) / 2 analytically
    and are computed along two different floating routes so their
    agreement is a meaningful check.  A nonzero mean adds
    S(mean, mean) / 2 to both sides of the duality identity and cancels
    in the gap.
    """

    space: SSpace
    sigma: np.ndarray
    mean: np.ndarray
    q: np.ndarray
    r: np.ndarray
    p: np.ndarray
    v: np.ndarray
    lam: np.ndarray
    primal_value: float
    dual_value: float

    @cached_property
    def sigma_inv(self) -> np.ndarray:
        eig = sym_eig(self.sigma, tol=self.space.tol)
        inv = eig.vectors @ np.diag(1.0 / eig.values) @ eig.vectors.T
        return 0.5 * (inv + inv.T)

    def plan_map(self, y) -> np.ndarray:
        """Optimal predecessor of y: mean + P (y - mean)."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.space.d,):
            raise DimensionMismatch("plan_map argument dimension mismatch")
        return self.mean + self.p @ (y - self.mean)

    def plan_map_rows(self, ys: np.ndarray) -> np.ndarray:
        ys = np.asarray(ys, dtype=float)
        return self.mean + (ys - self.mean) @ self.p.T

    def independent_split(self) -> tuple[np.ndarray, np.ndarray]:
        """Covariances (P Sigma, (I - P) Sigma) of the independent parts.

        Requires mean zero; verifies the covariances add to Sigma and that
        the cross-covariance P Sigma (I - P)^T vanishes.
        """
        if float(np.linalg.norm(self.mean)) > 1e-12:
            raise ValidationError("independent split is stated for mean zero")
        d = self.space.d
        q_x = self.p @ self.sigma
        r_z = (np.eye(d) - self.p) @ self.sigma
        scale = 1e-9 * max(1.0, float(np.linalg.norm(self.sigma)))
        if np.linalg.norm(q_x + r_z - self.sigma) > scale:
            raise SignatureMismatch("split covariances do not add to Sigma")
        cross = self.p @ self.sigma @ (np.eye(d) - self.p).T
        if np.linalg.norm(cross) > scale:
            raise SignatureMismatch("split cross-covariance is not zero")
        return q_x, r_z


def decompose(sp: SSpace, sigma, mean=None,
              tol: Tolerances = DEFAULT_TOLERANCES) -> GaussianDecomposition:
    """Compute the unique positive/negative covariance split for Sigma > 0.

    Raises NotPositiveDefinite for singular or indefinite Sigma (restrict
    the problem to the support subspace first if the data are degenerate)
    and SignatureMismatch if the congruent eigenvalues do not reproduce the
    signature of S, which cannot happen for valid inputs and guards
    tolerance failures.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = sp.d
    if sigma.shape != (d, d):
        raise DimensionMismatch("Sigma does not match the space dimension")
    mean = np.zeros(d) if mean is None else np.asarray(mean, dtype=float)
    if mean.shape != (d,):
        raise DimensionMismatch("mean does not match the space dimension")
    sig_eig = sym_eig(sigma, tol=tol)
    if sig_eig.values[-1] <= tol.pd * max(1.0, float(np.abs(sig_eig.values).max())):
        raise NotPositiveDefinite(
            "Sigma must be positive definite; restrict to the support subspace "
            "if the data are degenerate")

    w = spd_sqrt(sigma, tol=tol)
    core = w @ sp.s @ w
    eig = sym_eig(0.5 * (core + core.T), tol=tol)
    lam = eig.values
    scale = max(float(np.abs(lam).max()), 1e-300)
    if (np.abs(lam) < 1e-10 * scale).any():
        raise SignatureMismatch("congruent eigenvalue too close to zero to sign")
    positive = lam > 0.0
    if int(positive.sum()) != sp.m:
        raise SignatureMismatch(
            f"congruence produced {int(positive.sum())} positive eigenvalues, "
            f"expected {sp.m}")

    v = w @ eig.vectors
    a = np.diag(positive.astype(float))
    q = v @ a @ v.T
    q = 0.5 * (q + q.T)
    r = sigma - q
    r = 0.5 * (r + r.T)
    sig_inv = sig_eig.vectors @ np.diag(1.0 / sig_eig.values) @ sig_eig.vectors.T
    p = q @ sig_inv

    primal = 0.5 * float(np.trace(sp.s @ q))
    # Dual route: expected Fitzpatrick value of the affine optimal set for a
    # centered Gaussian, trace(S P Sigma) - trace(P^T S P Sigma) / 2.
    sp_mat = sp.s @ p
    dual = float(np.trace(sp_mat @ sigma)) - 0.5 * float(np.trace(p.T @ sp_mat @ sigma))
    return GaussianDecomposition(space=sp, sigma=sigma, mean=mean, q=q, r=r, p=p,
                                 v=v, lam=lam, primal_value=primal, dual_value=dual)


def pca_directions(sp: SSpace, sigma,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> list[tuple[float, np.ndarray]]:
    """Generalized eigenpairs of det(S - lam Sigma^{-1}) = 0, lam descending.

    The span of the positive-lam directions is the range of Q from the
    covariance split: they are the principal directions of the Gaussian in
    the S-space geometry.
    """
    sigma = np.asarray(sigma, dtype=float)
    sig_eig = sym_eig(sigma, tol=tol)
    if sig_eig.values[-1] <= tol.pd * max(1.0, float(np.abs(sig_eig.values).max())):
        raise NotPositiveDefinite("Sigma must be positive definite")
    w = spd_sqrt(sigma, tol=tol)
    core = w @ sp.s @ w
    eig = sym_eig(0.5 * (core + core.T), tol=tol)
    return [(float(lam), w @ eig.vectors[:, i]) for i, lam in enumerate(eig.values)]
