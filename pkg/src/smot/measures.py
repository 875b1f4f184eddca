"""Discrete measures, martingale plans, and the convex-order check.

A martingale plan couples a cluster layer (the x-marginal, which is part of
the solution) to the atoms of a fixed target measure nu so that every
cluster's assigned mass has barycenter exactly at the cluster point.
Assignments are stored sparsely: only strictly positive masses appear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import DimensionCap, DimensionMismatch, MartingaleViolated, ValidationError
from .linalg import LpProblem, lp_solve
from .sspace import SSpace

__all__ = ["DiscreteMeasure", "Cluster", "MartingalePlan", "convex_order_check"]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finitely many weighted atoms in R^d.

    Weights are strictly positive and sum to one; atoms are pairwise
    distinct.  Use :meth:`from_data` to build one from raw arrays (it merges
    near-duplicate atoms instead of rejecting them).
    """

    atoms: np.ndarray    # (n, d)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if atoms.ndim != 2 or weights.ndim != 1 or atoms.shape[0] != weights.size:
            raise DimensionMismatch(
                f"atoms {atoms.shape} and weights {weights.shape} are inconsistent")
        if atoms.shape[0] == 0:
            raise ValidationError("a measure needs at least one atom")
        if not (np.isfinite(atoms).all() and np.isfinite(weights).all()):
            raise ValidationError("measure data must be finite")
        if (weights <= 0.0).any():
            raise ValidationError("weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValidationError(f"weights sum to {weights.sum()!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_data(cls, atoms, weights=None, merge_tol: float = 1e-12) -> "DiscreteMeasure":
        """Build a measure, merging atoms closer than ``merge_tol``.

        Merging is grid-quantized at the tolerance (exact pairwise sweep for
        small supports), so it is deterministic and O(n log n).
        """
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        n = atoms.shape[0]
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.asarray(weights, dtype=float)
        quant = np.round(atoms / merge_tol) * merge_tol
        _, inverse = np.unique(quant, axis=0, return_inverse=True)
        k = inverse.max() + 1
        if k < n:
            merged_w = np.bincount(inverse, weights=weights, minlength=k)
            merged_a = np.zeros((k, atoms.shape[1]))
            for col in range(atoms.shape[1]):
                merged_a[:, col] = np.bincount(inverse, weights=weights * atoms[:, col],
                                               minlength=k) / merged_w
            atoms, weights = merged_a, merged_w
        if atoms.shape[0] <= 2000:
            atoms, weights = _pairwise_merge(atoms, weights, merge_tol)
        return cls(atoms=atoms, weights=weights)

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    def barycenter(self) -> np.ndarray:
        """Weighted mean of the atoms."""
        return self.weights @ self.atoms

    def covariance(self) -> np.ndarray:
        """Centered second-moment matrix; symmetric positive semi-definite."""
        centered = self.atoms - self.barycenter()
        cov = (centered * self.weights[:, None]).T @ centered
        return 0.5 * (cov + cov.T)


def _pairwise_merge(atoms: np.ndarray, weights: np.ndarray,
                    merge_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact O(n^2) merge of atoms within ``merge_tol`` of each other."""
    n = atoms.shape[0]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    diff = atoms[:, None, :] - atoms[None, :, :]
    close = np.sqrt((diff ** 2).sum(axis=2)) <= merge_tol
    for i in range(n):
        for j in range(i + 1, n):
            if close[i, j]:
                parent[find(j)] = find(i)
    roots = [find(i) for i in range(n)]
    labels = {r: k for k, r in enumerate(dict.fromkeys(roots))}
    inverse = np.array([labels[r] for r in roots])
    k = len(labels)
    if k == n:
        return atoms, weights
    out_w = np.bincount(inverse, weights=weights, minlength=k)
    out_a = np.zeros((k, atoms.shape[1]))
    for col in range(atoms.shape[1]):
        out_a[:, col] = np.bincount(inverse, weights=weights * atoms[:, col],
                                    minlength=k) / out_w
    return out_a, out_w


@dataclass(frozen=True)
class Cluster:
    """One x-atom of a plan: its location, mass, and sparse assignment."""

    x: np.ndarray             # (d,)
    p: float
    atom_indices: np.ndarray  # indices into nu.atoms
    masses: np.ndarray        # matching strictly positive masses


@dataclass(frozen=True)
class MartingalePlan:
    """Finitely supported coupling with y-marginal nu and barycenter clusters.

    Invariants (checked on construction): masses are positive and per-atom
    column sums reproduce nu's weights; each cluster's mass-weighted atom
    barycenter equals the cluster point; cluster points are pairwise
    distinct.
    """

    nu: DiscreteMeasure
    clusters: tuple[Cluster, ...]
    tol: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        col = np.zeros(self.nu.n)
        for c in self.clusters:
            if c.masses.size == 0 or (c.masses <= 0.0).any():
                raise ValidationError("cluster masses must be strictly positive")
            if abs(c.masses.sum() - c.p) > 1e-10 * (1.0 + abs(c.p)):
                raise ValidationError("cluster mass does not match its assignment total")
            bary = (c.masses @ self.nu.atoms[c.atom_indices]) / c.p
            if np.linalg.norm(bary - c.x) > self.tol.martingale * (
                    1.0 + float(np.linalg.norm(c.x))):
                raise MartingaleViolated(
                    f"cluster barycenter deviates by {np.linalg.norm(bary - c.x):.3e}")
            np.add.at(col, c.atom_indices, c.masses)
        if np.abs(col - self.nu.weights).max() > self.tol.marginal:
            raise ValidationError("plan y-marginal does not reproduce nu")
        xs = np.array([c.x for c in self.clusters])
        if xs.shape[0] > 1 and xs.shape[0] <= 4000:
            diff = xs[:, None, :] - xs[None, :, :]
            dist = np.sqrt((diff ** 2).sum(axis=2))
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= 1e-12:
                raise ValidationError("cluster points must be pairwise distinct")

    @classmethod
    def from_assignment(cls, nu: DiscreteMeasure, rows: np.ndarray, cols: np.ndarray,
                        masses: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES,
                        ) -> "MartingalePlan":
        """Build a plan from sparse (cluster, atom, mass) triplets.

        Cluster points are recomputed as exact assignment barycenters, dust
        clusters (mass below ``tol.drop``) are dropped with their mass
        returned to the surviving cluster nearest in total-variation terms,
        and clusters sharing a barycenter are merged.
        """
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        masses = np.asarray(masses, dtype=float)
        keep = masses > 0.0
        rows, cols, masses = rows[keep], cols[keep], masses[keep]
        if rows.size == 0:
            raise ValidationError("plan assignment is empty")
        k = rows.max() + 1
        p = np.bincount(rows, weights=masses, minlength=k)
        live = p > tol.drop
        if not live.all():
            # Re-route dust mass through the trivial repair: scale each atom's
            # column so it sums to its weight again after dropping dust rows.
            keep = live[rows]
            rows, cols, masses = rows[keep], cols[keep], masses[keep]
            col_sum = np.bincount(cols, weights=masses, minlength=nu.n)
            want = nu.weights
            factor = np.where(col_sum > 0.0, want / np.maximum(col_sum, 1e-300), 1.0)
            masses = masses * factor[cols]
            p = np.bincount(rows, weights=masses, minlength=k)
            live = p > tol.drop
        d = nu.d
        s = np.zeros((k, d))
        for col in range(d):
            s[:, col] = np.bincount(rows, weights=masses * nu.atoms[cols, col], minlength=k)
        xs = np.zeros((k, d))
        xs[live] = s[live] / p[live, None]
        # Merge clusters whose barycenters coincide (quantized at 1e-12).
        label_of = {}
        remap = np.full(k, -1, dtype=int)
        for i in np.nonzero(live)[0]:
            key = tuple(np.round(xs[i] / 1e-12).astype(np.int64) if np.abs(xs[i]).max() < 1e6
                        else np.round(xs[i], 6))
            remap[i] = label_of.setdefault(key, len(label_of))
        kk = len(label_of)
        new_rows = remap[rows]
        clusters = []
        order = np.lexsort((cols, new_rows))
        new_rows, cols2, masses2 = new_rows[order], cols[order], masses[order]
        for lab in range(kk):
            sel = new_rows == lab
            idx = cols2[sel]
            w = masses2[sel]
            # Collapse duplicate atom entries within the cluster.
            uniq, inv = np.unique(idx, return_inverse=True)
            w = np.bincount(inv, weights=w)
            pk = float(w.sum())
            x = (w @ nu.atoms[uniq]) / pk
            clusters.append(Cluster(x=x, p=pk, atom_indices=uniq, masses=w))
        return cls(nu=nu, clusters=tuple(clusters), tol=tol)

    @classmethod
    def identity(cls, nu: DiscreteMeasure, tol: Tolerances = DEFAULT_TOLERANCES,
                 ) -> "MartingalePlan":
        """The plan with x = y: every atom is its own cluster."""
        n = nu.n
        idx = np.arange(n)
        return cls.from_assignment(nu, idx, idx, nu.weights.copy(), tol=tol)

    @classmethod
    def single_cluster(cls, nu: DiscreteMeasure, tol: Tolerances = DEFAULT_TOLERANCES,
                       ) -> "MartingalePlan":
        """The plan collapsing all mass to the barycenter of nu."""
        n = nu.n
        return cls.from_assignment(nu, np.zeros(n, dtype=int), np.arange(n),
                                   nu.weights.copy(), tol=tol)

    @property
    def k(self) -> int:
        return len(self.clusters)

    def x_marginal(self) -> DiscreteMeasure:
        xs = np.array([c.x for c in self.clusters])
        ps = np.array([c.p for c in self.clusters])
        return DiscreteMeasure.from_data(xs, ps / ps.sum())

    def support_pairs(self):
        """Yield (cluster_index, atom_index, mass) over the sparse support."""
        for k, c in enumerate(self.clusters):
            for j, w in zip(c.atom_indices, c.masses):
                yield k, int(j), float(w)

    def value(self, sp: SSpace) -> float:
        """Half the expected scalar square of the cluster layer.

        Also evaluates the coupled form (half the expectation of S(x, y))
        and raises MartingaleViolated if the two disagree beyond tolerance;
        under the barycenter constraint they are the same integral.
        """
        xs = np.array([c.x for c in self.clusters])
        ps = np.array([c.p for c in self.clusters])
        direct = 0.5 * float(ps @ sp.scalar_squares(xs))
        coupled = 0.0
        for c in self.clusters:
            sy = self.nu.atoms[c.atom_indices] @ sp.s @ c.x
            coupled += float(c.masses @ sy)
        coupled *= 0.5
        if abs(direct - coupled) > self.tol.value * (1.0 + abs(direct)):
            raise MartingaleViolated(
                f"plan value cross-check failed: {direct!r} vs {coupled!r}")
        return direct


def convex_order_check(mu: DiscreteMeasure, nu: DiscreteMeasure,
                       tol: Tolerances = DEFAULT_TOLERANCES,
                       max_vars: int = 20000,
                       ) -> tuple[bool, MartingalePlan | None]:
    """Is mu dominated by nu in the convex order?

    Feasibility LP for a coupling pi >= 0 with row sums mu.weights, column
    sums nu.weights, and row barycenters at mu's atoms; a feasible pi is a
    martingale coupling witnessing the domination and is returned as a plan.
    """
    if mu.d != nu.d:
        raise DimensionMismatch("measures live in different dimensions")
    k, n, d = mu.n, nu.n, mu.d
    nvars = k * n
    if nvars > max_vars:
        raise DimensionCap(f"coupling LP with {nvars} variables exceeds the cap {max_vars}")

    def vid(i, j):
        return i * n + j

    rows = []
    rhs = []
    for i in range(k):  # row sums
        r = np.zeros(nvars)
        r[i * n:(i + 1) * n] = 1.0
        rows.append(r)
        rhs.append(mu.weights[i])
    for j in range(n):  # column sums
        r = np.zeros(nvars)
        r[[vid(i, j) for i in range(k)]] = 1.0
        rows.append(r)
        rhs.append(nu.weights[j])
    for i in range(k):  # barycenter constraints
        for axis in range(d):
            r = np.zeros(nvars)
            r[i * n:(i + 1) * n] = nu.atoms[:, axis]
            rows.append(r)
            rhs.append(mu.weights[i] * mu.atoms[i, axis])
    problem = LpProblem(c=np.zeros(nvars), a_eq=np.array(rows), b_eq=np.array(rhs))
    res = lp_solve(problem, tol=tol)
    if res.status != "optimal":
        return False, None
    pi = res.x.reshape(k, n)
    rr, cc = np.nonzero(pi > 0.0)
    plan = MartingalePlan.from_assignment(nu, rr, cc, pi[rr, cc], tol=tol)
    return True, plan
