"""Dense linear-algebra and small-LP kernels.

Self-contained numerics used by every other module: a cyclic Jacobi
eigensolver for symmetric matrices, a symmetric positive-definite square
root, tolerance-based rank, and a dense two-phase primal simplex with
Bland's rule.  All kernels are deterministic: identical inputs produce
bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES, EIG_DIM_CAP, LP_ROW_CAP, LP_VAR_CAP, Tolerances
from .errors import (
    CycleGuard,
    DimensionCap,
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
    NotSymmetric,
)

__all__ = [
    "EigenResult",
    "LpProblem",
    "LpResult",
    "sym_eig",
    "spd_sqrt",
    "rank_tol",
    "lp_solve",
]


@dataclass(frozen=True)
class EigenResult:
    """Spectral decomposition A = V diag(values) V^T.

    Eigenvalues are sorted descending; exact ties are ordered by the
    lexicographically smaller eigenvector so the output is deterministic.
    Columns of ``vectors`` are the orthonormal eigenvectors.
    """

    values: np.ndarray
    vectors: np.ndarray


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise DimensionMismatch("matrix entries must be finite")
    return a


def _fro(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def sym_eig(a, tol: Tolerances = DEFAULT_TOLERANCES, max_sweeps: int = 64,
            max_dim: int = EIG_DIM_CAP) -> EigenResult:
    """Full spectral decomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Raises NotSymmetric if the asymmetry exceeds ``tol.sym`` relative to the
    matrix norm, NoConvergence if the sweep cap is hit or the reconstruction
    error exceeds ``tol.eig`` relative, DimensionCap beyond ``max_dim``.
    """
    a = _as_square(a)
    n = a.shape[0]
    if n > max_dim:
        raise DimensionCap(f"matrix dimension {n} exceeds the eigensolver cap {max_dim}")
    scale = _fro(a)
    if _fro(a - a.T) > tol.sym * max(scale, 1.0):
        raise NotSymmetric("matrix is not symmetric within tolerance")

    w = 0.5 * (a + a.T)
    v = np.eye(n)
    target = max(scale, 1.0) * 1e-14
    converged = n <= 1

    def off_norm(mat):
        off = mat.copy()
        np.fill_diagonal(off, 0.0)
        return _fro(off)

    for _ in range(max_sweeps):
        if off_norm(w) <= target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                rot_p = c * w[:, p] - s * w[:, q]
                rot_q = s * w[:, p] + c * w[:, q]
                w[:, p], w[:, q] = rot_p, rot_q
                rot_p = c * w[p, :] - s * w[q, :]
                rot_q = s * w[p, :] + c * w[q, :]
                w[p, :], w[q, :] = rot_p, rot_q
                w[p, q] = w[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    if not converged and off_norm(w) > target:
        raise NoConvergence(
            f"Jacobi sweeps did not converge (off-diagonal {off_norm(w):.3e})")

    lam = np.diag(w).copy()
    # Deterministic sign: largest-magnitude component of each vector positive.
    for j in range(n):
        k = int(np.argmax(np.abs(v[:, j])))
        if v[k, j] < 0.0:
            v[:, j] = -v[:, j]
    order = sorted(range(n), key=lambda j: (-lam[j], tuple(v[:, j])))
    lam = lam[order]
    v = v[:, order]

    recon = v @ np.diag(lam) @ v.T
    if _fro(recon - a) > tol.eig * max(scale, 1.0):
        raise NoConvergence("eigen reconstruction error exceeds tolerance")
    return EigenResult(values=lam, vectors=v)


def spd_sqrt(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Symmetric B with B @ B = A for symmetric positive-definite A."""
    eig = sym_eig(a, tol=tol)
    if eig.values.size and eig.values[-1] <= tol.pd:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {eig.values[-1]:.3e} is not above the floor {tol.pd:.0e}")
    b = eig.vectors @ np.diag(np.sqrt(eig.values)) @ eig.vectors.T
    return 0.5 * (b + b.T)


def rank_tol(a, tau: float, tol: Tolerances = DEFAULT_TOLERANCES,
             scale: float | None = None) -> int:
    """Number of singular values exceeding ``tau`` times the largest one.

    Symmetric inputs use the absolute values of their eigenvalues; general
    matrices go through the eigenvalues of A^T A.  When the matrix is a
    summand of a larger problem (so that its own norm may be pure roundoff)
    pass the ambient ``scale`` to rank against instead.
    """
    if tau <= 0.0:
        raise ValueError("rank tolerance must be positive")
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {a.shape}")
    if a.shape[0] == a.shape[1] and _fro(a - a.T) <= tol.sym * max(_fro(a), 1.0):
        sing = np.abs(sym_eig(a, tol=tol).values)
    else:
        gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
        sing = np.sqrt(np.clip(sym_eig(gram, tol=tol).values, 0.0, None))
    top = float(sing.max()) if sing.size else 0.0
    ref = top if scale is None else float(scale)
    if ref <= 0.0:
        return 0
    return int(np.sum(sing > tau * ref))


@dataclass(frozen=True)
class LpProblem:
    """min c @ x  subject to  a_eq @ x = b_eq, x >= 0."""

    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=float)))
        a = np.asarray(self.a_eq, dtype=float)
        if a.size == 0:
            a = a.reshape(0, self.c.size)
        object.__setattr__(self, "a_eq", np.atleast_2d(a))
        object.__setattr__(self, "b_eq", np.atleast_1d(np.asarray(self.b_eq, dtype=float)))
        m, n = self.a_eq.shape
        if n != self.c.size or m != self.b_eq.size:
            raise DimensionMismatch(
                f"inconsistent LP dimensions: c {self.c.shape}, A {self.a_eq.shape}, "
                f"b {self.b_eq.shape}")
        for arr in (self.c, self.a_eq, self.b_eq):
            if not np.isfinite(arr).all():
                raise DimensionMismatch("LP data must be finite")


@dataclass
class LpResult:
    status: str                      # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    value: float | None = None
    certificate: dict = field(default_factory=dict)
    pivots: int = 0


def _bland(t: np.ndarray, basis: list[int], ncols: int, tol: float,
           pivots: int, max_pivots: int) -> tuple[str, int, int]:
    """Run Bland-rule pivoting on tableau ``t`` in place.

    Returns (status, entering_column_or_-1, pivot_count); status is
    "optimal" or "unbounded".
    """
    rows = t.shape[0] - 1
    while True:
        enter = -1
        for j in range(ncols):
            if t[-1, j] < -tol:
                enter = j
                break
        if enter < 0:
            return "optimal", -1, pivots
        leave = -1
        best_ratio = math.inf
        for i in range(rows):
            aij = t[i, enter]
            if aij > tol:
                ratio = t[i, -1] / aij
                if ratio < best_ratio - 1e-15 or (
                        abs(ratio - best_ratio) <= 1e-15
                        and (leave < 0 or basis[i] < basis[leave])):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return "unbounded", enter, pivots
        pivots += 1
        if pivots > max_pivots:
            raise CycleGuard(f"simplex exceeded the pivot bound {max_pivots}")
        piv = t[leave, enter]
        t[leave, :] /= piv
        col = t[:, enter].copy()
        col[leave] = 0.0
        t -= np.outer(col, t[leave, :])
        t[:, enter] = 0.0
        t[leave, enter] = 1.0
        basis[leave] = enter


def lp_solve(problem: LpProblem, tol: Tolerances = DEFAULT_TOLERANCES,
             max_vars: int = LP_VAR_CAP, max_rows: int = LP_ROW_CAP,
             max_pivots: int = 200_000) -> LpResult:
    """Dense two-phase primal simplex with Bland's rule.

    Infeasible problems come back with a Farkas vector y (y @ A <= 0,
    y @ b > 0) extracted from the phase-1 duals; unbounded problems with a
    feasible ray d (A @ d = 0, d >= 0, c @ d < 0).  Both certificates are
    re-verified against the input data and carry an ``ok`` flag.
    """
    c = problem.c.copy()
    a0 = problem.a_eq.copy()
    b0 = problem.b_eq.copy()
    m, n = a0.shape
    if n > max_vars or m > max_rows:
        raise DimensionCap(f"LP size {m}x{n} exceeds caps {max_rows}x{max_vars}")

    sign = np.where(b0 < 0.0, -1.0, 1.0)
    a = a0 * sign[:, None]
    b = b0 * sign
    eps = tol.lp

    # Phase 1: artificial basis, minimize the sum of artificials.
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n:n + m] = np.eye(m)
    t[:m, -1] = b
    t[m, :n] = -a.sum(axis=0)
    t[m, -1] = -b.sum()
    basis = list(range(n, n + m))
    status, _, pivots = _bland(t, basis, n + m, eps, 0, max_pivots)
    if status != "optimal":  # pragma: no cover - min of nonnegatives is bounded
        raise CycleGuard("phase-1 simplex reported an unbounded artificial objective")
    phase1 = -t[m, -1]
    if phase1 > eps * (1.0 + float(np.abs(b).sum())):
        y_hat = 1.0 - t[m, n:n + m]
        y = sign * y_hat
        resid = y @ a0
        cert = {
            "kind": "farkas",
            "y": y,
            "y_dot_b": float(y @ b0),
            "max_y_dot_a": float(resid.max()) if resid.size else 0.0,
            "phase1_value": float(phase1),
        }
        cert["ok"] = bool(cert["y_dot_b"] > 0.0
                          and cert["max_y_dot_a"] <= eps * (1.0 + _fro(a0)))
        return LpResult(status="infeasible", certificate=cert, pivots=pivots)

    # Drive leftover artificials out of the basis; drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= n:
            piv_col = -1
            for j in range(n):
                if abs(t[r, j]) > eps:
                    piv_col = j
                    break
            if piv_col < 0:
                continue  # redundant constraint row
            piv = t[r, piv_col]
            t[r, :] /= piv
            col = t[:, piv_col].copy()
            col[r] = 0.0
            t -= np.outer(col, t[r, :])
            t[:, piv_col] = 0.0
            t[r, piv_col] = 1.0
            basis[r] = piv_col
        keep.append(r)

    rows = len(keep)
    t2 = np.zeros((rows + 1, n + 1))
    for i, r in enumerate(keep):
        t2[i, :n] = t[r, :n]
        t2[i, -1] = t[r, -1]
    basis2 = [basis[r] for r in keep]
    t2[rows, :n] = c
    for i in range(rows):
        cb = c[basis2[i]]
        if cb != 0.0:
            t2[rows, :] -= cb * t2[i, :]

    status, enter, pivots = _bland(t2, basis2, n, eps, pivots, max_pivots)
    if status == "unbounded":
        d = np.zeros(n)
        d[enter] = 1.0
        for i in range(rows):
            d[basis2[i]] = -t2[i, enter]
        d[np.abs(d) < eps] = np.where(d[np.abs(d) < eps] < 0, 0.0, d[np.abs(d) < eps])
        cert = {
            "kind": "ray",
            "direction": d,
            "a_dot_d": float(_fro(a0 @ d)),
            "c_dot_d": float(c @ d),
            "min_entry": float(d.min()),
        }
        cert["ok"] = bool(cert["a_dot_d"] <= eps * (1.0 + _fro(a0))
                          and cert["c_dot_d"] < 0.0 and cert["min_entry"] >= -eps)
        return LpResult(status="unbounded", certificate=cert, pivots=pivots)

    x = np.zeros(n)
    for i in range(rows):
        x[basis2[i]] = t2[i, -1]
    x[(x < 0.0) & (x >= -eps)] = 0.0
    return LpResult(status="optimal", x=x, value=float(c @ x), pivots=pivots)
