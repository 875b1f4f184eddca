"""S-monotone sets and their Fitzpatrick functions.

A set G is S-monotone when S(x - y, x - y) >= 0 for all x, y in G.  Its
Fitzpatrick function is

    psi_G(y) = sup_{x in G} { S(x, y) - S(x, x) / 2 },

a closed convex function with values in R or +inf.  The minimal scalar
square to G is phi_G(y) = S(y, y) - 2 psi_G(y), and the S-projection
P_G(y) collects the points of G attaining it (equivalently, the maximizers
defining psi_G).  Three representations are supported:

* FiniteSet          - explicit atoms; psi is an exact finite maximum.
* AffineSubspace     - x0 + range(P) for an idempotent P whose projection
                       is the S-projection onto the set; psi has a closed
                       form and is +inf exactly when the set contains a
                       null direction not S-orthogonal to y - x0.
* LipschitzGraph     - in canonical coordinates, the graph of the maximal
                       1-Lipschitz extension of grid-node values (scalar
                       codomain).  psi is evaluated by grid search with
                       local refinement and is flagged as a lower bound.

Infinite values are carried as ``math.inf`` inside FitzEval and are never
fed back into arithmetic; every consumer checks ``is_finite`` first.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    BoundaryPoint,
    CodomainTooLarge,
    DimensionCap,
    DimensionMismatch,
    EmptyProjection,
    NotMonotone,
    UnboundedBelow,
    ValidationError,
)
from .linalg import LpProblem, lp_solve, sym_eig
from .sspace import SSpace

__all__ = [
    "FitzEval",
    "MonotoneSet",
    "FiniteSet",
    "AffineSubspace",
    "LipschitzGraph",
    "is_s_monotone",
    "is_strictly_monotone",
    "mcshane_maximal_extension",
    "psi_conjugate_at",
    "SubdifferentialResult",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FitzEval:
    """One Fitzpatrick evaluation.

    ``value`` is math.inf when the supremum is unbounded; ``maximizers``
    lists the points of G attaining it within tolerance.  ``lower_bound``
    marks grid-searched values (LipschitzGraph); ``boundary`` additionally
    marks grid maxima attained on the search-box boundary, where the true
    supremum may lie outside the sampled region.
    """

    value: float
    maximizers: tuple = ()
    lower_bound: bool = False
    boundary: bool = False

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


def is_s_monotone(sp: SSpace, points, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Pairwise S(x - y, x - y) >= 0 up to a scale-aware slack."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    for i in range(pts.shape[0]):
        diff = pts[i + 1:] - pts[i]
        if diff.size == 0:
            continue
        sq = sp.scalar_squares(diff)
        slack = 1e-10 * (1.0 + (diff ** 2).sum(axis=1))
        if (sq < -slack).any():
            return False
    return True


def is_strictly_monotone(sp: SSpace, points, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    """Pairwise S(x - y, x - y) strictly positive beyond the slack."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    for i in range(pts.shape[0]):
        diff = pts[i + 1:] - pts[i]
        if diff.size == 0:
            continue
        sq = sp.scalar_squares(diff)
        slack = 1e-10 * (1.0 + (diff ** 2).sum(axis=1))
        if (sq <= slack).any():
            return False
    return True


class MonotoneSet:
    """Common surface of the three representations."""

    space: SSpace
    tol: Tolerances

    def psi(self, y) -> FitzEval:
        raise NotImplementedError

    def phi(self, y) -> float:
        """S(y, y) - 2 psi(y); raises UnboundedBelow when psi is infinite."""
        ev = self.psi(y)
        if not ev.is_finite:
            raise UnboundedBelow("phi is -inf where psi is +inf")
        y = np.asarray(y, dtype=float)
        return self.space.scalar_square(y) - 2.0 * ev.value

    def project(self, y) -> list[np.ndarray]:
        """Points of the set attaining phi(y) within the scaled tolerance."""
        raise NotImplementedError

    def contains(self, x) -> bool:
        """Membership at the representation tolerance."""
        raise NotImplementedError

    def affine_piece(self, x, y) -> float:
        """S(x, y) - S(x, x)/2 for a candidate maximizer x."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.space.bilinear(x, y) - 0.5 * self.space.scalar_square(x)

    def q_eps_membership(self, x, y, eps: float) -> bool:
        """Does y lie in the eps-forward set of x?

        True when both y and the reflected point x + eps (x - y) project to
        x, i.e. x attains the minimal scalar square for both probes.
        """
        if eps <= 0.0:
            raise ValueError("eps must be positive")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.contains(x):
            raise ValidationError("q_eps_membership requires x in the set")
        reflected = x + eps * (x - y)
        return self._attains(x, y) and self._attains(x, reflected)

    def _attains(self, x, y) -> bool:
        """Does x attain the minimal scalar square from y within tolerance?"""
        try:
            ev = self.psi(y)
        except EmptyProjection:
            return False
        if not ev.is_finite:
            return False
        scale = self.tol.proj * (1.0 + float(y @ y))
        return self.affine_piece(x, y) >= ev.value - scale

    def subdifferential_interior(self, y, fd_step: float | None = None,
                                 ) -> "SubdifferentialResult":
        """Generators of the subdifferential of psi at an interior point.

        The subdifferential at interior points of the domain is the convex
        hull of { S x : x in P_G(y) }.  Interiority is checked by sampling
        psi on a small axis ball around y; when the projection is unique the
        generator is cross-validated against a central finite-difference
        gradient of psi.
        """
        y = np.asarray(y, dtype=float)
        d = self.space.d
        h = fd_step if fd_step is not None else 1e-5 * (1.0 + float(np.linalg.norm(y)))
        ball = [y] + [y + s * h * e for e in np.eye(d) for s in (+1.0, -1.0)]
        evals = []
        for probe in ball:
            ev = self.psi(probe)
            if not ev.is_finite or ev.boundary:
                raise BoundaryPoint("psi is not reliably finite on a ball around y")
            evals.append(ev.value)
        projections = self.project(y)
        generators = [self.space.s @ x for x in projections]
        fd_gradient = None
        fd_rel_error = None
        if len(projections) == 1:
            grad = np.array([(evals[1 + 2 * i] - evals[2 + 2 * i]) / (2.0 * h)
                             for i in range(d)])
            fd_gradient = grad
            g = generators[0]
            fd_rel_error = float(np.linalg.norm(grad - g) / (1.0 + np.linalg.norm(g)))
        return SubdifferentialResult(generators=generators, fd_gradient=fd_gradient,
                                     fd_rel_error=fd_rel_error)


@dataclass(frozen=True)
class SubdifferentialResult:
    generators: list
    fd_gradient: np.ndarray | None = None
    fd_rel_error: float | None = None


class FiniteSet(MonotoneSet):
    """Explicit finite S-monotone set."""

    def __init__(self, sp: SSpace, points, tol: Tolerances = DEFAULT_TOLERANCES,
                 validate: bool = True):
        self.space = sp
        self.tol = tol
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.points.shape[1] != sp.d:
            raise DimensionMismatch("points do not match the space dimension")
        if validate and not is_s_monotone(sp, self.points, tol):
            raise NotMonotone("point set is not S-monotone")
        # Precompute the affine pieces l_i(y) = <S x_i, y> - S(x_i, x_i)/2.
        self._sx = self.points @ sp.s
        self._b = 0.5 * sp.scalar_squares(self.points)

    def _pieces(self, y: np.ndarray) -> np.ndarray:
        return self._sx @ y - self._b

    def psi(self, y) -> FitzEval:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.space.d,):
            raise DimensionMismatch("probe dimension mismatch")
        vals = self._pieces(y)
        best = float(vals.max())
        cut = self.tol.proj * (1.0 + float(y @ y))
        maxers = tuple(self.points[i] for i in np.nonzero(vals >= best - cut)[0])
        return FitzEval(value=best, maximizers=maxers)

    def phi(self, y) -> float:
        val = super().phi(y)
        y = np.asarray(y, dtype=float)
        direct = float(self.space.scalar_squares(self.points - y).min())
        if abs(val - direct) > 1e-9 * (1.0 + abs(val)):
            raise ValidationError("phi cross-check against direct minimum failed")
        return val

    def project(self, y) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        sq = self.space.scalar_squares(self.points - y)
        best = float(sq.min())
        cut = self.tol.proj * (1.0 + float(y @ y))
        return [self.points[i] for i in np.nonzero(sq <= best + cut)[0]]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        dist = np.sqrt(((self.points - x) ** 2).sum(axis=1)).min()
        return bool(dist <= 1e-8 * (1.0 + float(np.linalg.norm(x))))


class AffineSubspace(MonotoneSet):
    """Affine maximal S-monotone set x0 + range(P).

    For the strictly monotone family the idempotent P is the S-projection
    matrix onto the set and satisfies: S P symmetric, S P >= 0,
    S (I - P) <= 0, S (2P - I) > 0.  Construction with ``validate=False``
    admits borderline sets containing null directions; psi then returns
    +inf off the finiteness hyperplane.
    """

    def __init__(self, sp: SSpace, x0, p, tol: Tolerances = DEFAULT_TOLERANCES,
                 validate: bool = True):
        self.space = sp
        self.tol = tol
        self.x0 = np.asarray(x0, dtype=float)
        self.p = np.asarray(p, dtype=float)
        if self.x0.shape != (sp.d,) or self.p.shape != (sp.d, sp.d):
            raise DimensionMismatch("affine data does not match the space dimension")
        if validate:
            self._validate()
        self._null_dirs = self._null_directions()

    def _validate(self):
        s, p = self.space.s, self.p
        d = self.space.d
        scale = max(1.0, float(np.linalg.norm(p)))
        slack = self.tol.psd * max(1.0, float(np.linalg.norm(s))) * scale
        if np.linalg.norm(p @ p - p) > slack * scale:
            raise ValidationError("P is not idempotent within tolerance")
        sp_mat = s @ p
        if np.linalg.norm(sp_mat - sp_mat.T) > slack:
            raise ValidationError("S P is not symmetric within tolerance")
        sym = 0.5 * (sp_mat + sp_mat.T)
        if sym_eig(sym, tol=self.tol).values[-1] < -slack:
            raise ValidationError("S P is not positive semi-definite")
        s_rest = s @ (np.eye(d) - p)
        sym = 0.5 * (s_rest + s_rest.T)
        if sym_eig(sym, tol=self.tol).values[0] > slack:
            raise ValidationError("S (I - P) is not negative semi-definite")
        s_gap = s @ (2.0 * p - np.eye(d))
        sym = 0.5 * (s_gap + s_gap.T)
        if sym_eig(sym, tol=self.tol).values[-1] < -slack:
            raise ValidationError("S (2P - I) fails the positivity condition")

    def _null_directions(self) -> np.ndarray:
        """Orthonormal directions u of the subspace with S(u, u) = 0.

        Detected from the spectrum of S restricted to range(P); such
        directions force psi to +inf off the hyperplane S(u, y - x0) = 0.
        """
        gram = self.p @ self.p.T
        eig = sym_eig(gram, tol=self.tol)
        top = max(float(np.abs(eig.values).max()), 1e-300)
        basis = eig.vectors[:, np.abs(eig.values) > self.tol.rank * top]
        if basis.shape[1] == 0:
            return np.zeros((self.space.d, 0))
        restricted = basis.T @ self.space.s @ basis
        reig = sym_eig(0.5 * (restricted + restricted.T), tol=self.tol)
        rtop = max(float(np.abs(reig.values).max()), 1.0)
        null = np.abs(reig.values) <= self.tol.rank * rtop
        return basis @ reig.vectors[:, null]

    def psi(self, y) -> FitzEval:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.space.d,):
            raise DimensionMismatch("probe dimension mismatch")
        rel = y - self.x0
        if self._null_dirs.shape[1]:
            along = self._null_dirs.T @ (self.space.s @ rel)
            cut = self.tol.rank * (1.0 + float(np.linalg.norm(rel)))
            if np.abs(along).max() > cut:
                return FitzEval(value=math.inf)
        xhat = self.x0 + self.p @ rel
        value = self.affine_piece(xhat, y)
        return FitzEval(value=value, maximizers=(xhat,))

    def project(self, y) -> list[np.ndarray]:
        y = np.asarray(y, dtype=float)
        return [self.x0 + self.p @ (y - self.x0)]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        resid = x - (self.x0 + self.p @ (x - self.x0))
        return bool(np.linalg.norm(resid) <= 1e-8 * (1.0 + float(np.linalg.norm(x))))


class LipschitzGraph(MonotoneSet):
    """Graph of a 1-Lipschitz function in canonical coordinates.

    Only scalar codomains are supported (one negative canonical axis); the
    represented set is the graph of the maximal 1-Lipschitz extension of
    the grid-node values,

        f(u) = min over nodes i of ( f_i + |u - u_i| ),

    mapped back through the frame.  Fitzpatrick evaluations search the grid
    and refine locally, so they are lower bounds on the true supremum.
    """

    def __init__(self, sp: SSpace, axes: list[np.ndarray], values: np.ndarray,
                 tol: Tolerances = DEFAULT_TOLERANCES, validate: bool = True,
                 anchors: tuple[np.ndarray, np.ndarray] | None = None):
        self.space = sp
        self.tol = tol
        if sp.d - sp.m != 1:
            raise CodomainTooLarge(
                f"graph codomain must be one-dimensional, got {sp.d - sp.m}")
        if sp.m < 1:
            raise ValidationError("graph representation needs at least one positive axis")
        self.axes = [np.asarray(ax, dtype=float) for ax in axes]
        if len(self.axes) != sp.m:
            raise DimensionMismatch("one axis array per positive canonical coordinate")
        for ax in self.axes:
            if ax.ndim != 1 or ax.size < 2 or (np.diff(ax) <= 0.0).any():
                raise ValidationError("axes must be strictly increasing 1-d arrays")
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != tuple(ax.size for ax in self.axes):
            raise DimensionMismatch("values shape does not match the grid")
        self.frame = sp.frame
        mesh = np.meshgrid(*self.axes, indexing="ij")
        self._nodes_u = np.stack([g.ravel() for g in mesh], axis=1)   # (n_nodes, m)
        self._nodes_f = self.values.ravel()
        # Anchors are the constraint points generating the extension; a
        # directly built grid anchors on its own nodes.
        if anchors is None:
            self._anchor_u, self._anchor_f = self._nodes_u, self._nodes_f
        else:
            self._anchor_u = np.atleast_2d(np.asarray(anchors[0], dtype=float))
            self._anchor_f = np.atleast_1d(np.asarray(anchors[1], dtype=float))
        if validate:
            self._validate_lipschitz()
        # Original-coordinate node points, for monotonicity and psi scans.
        w = np.concatenate([self._nodes_u, self._nodes_f[:, None]], axis=1)
        self._nodes_x = w @ self.frame.v_inv.T

    def _validate_lipschitz(self):
        u, f = self._nodes_u, self._nodes_f
        n = u.shape[0]
        if self.space.m == 1:
            du = np.abs(np.diff(u[:, 0]))
            df = np.abs(np.diff(f))
            if (df > du + 1e-10 * (1.0 + du)).any():
                raise NotMonotone("grid values violate the 1-Lipschitz bound")
            return
        if n <= 2500:
            pairs = itertools.combinations(range(n), 2)
        else:
            # Partial check on sampled pairs; exhaustive validation of large
            # multi-axis grids is quadratic in the node count.
            rng = np.random.default_rng(0)
            pairs = zip(rng.integers(0, n, 20000), rng.integers(0, n, 20000))
        for i, j in pairs:
            if i == j:
                continue
            du = float(np.linalg.norm(u[i] - u[j]))
            if abs(f[i] - f[j]) > du + 1e-10 * (1.0 + du):
                raise NotMonotone("grid values violate the 1-Lipschitz bound")

    def f(self, u) -> float:
        """Maximal 1-Lipschitz extension of the anchor constraints at u."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        dist = np.sqrt(((self._anchor_u - u) ** 2).sum(axis=1))
        return float((self._anchor_f + dist).min())

    def point_at(self, u) -> np.ndarray:
        """Original-coordinate point of the graph above u."""
        w = np.concatenate([np.atleast_1d(u), [self.f(u)]])
        return self.frame.from_canonical(w)

    def _objective(self, u: np.ndarray, a: np.ndarray, b: float) -> float:
        """Canonical-coordinate affine piece at the graph point above u."""
        fu = self.f(u)
        return float(u @ a) - fu * b - 0.5 * (float(u @ u) - fu * fu)

    def _search(self, y: np.ndarray) -> tuple[float, np.ndarray, bool]:
        """Grid scan plus coordinate golden-section refinement.

        Returns (best value, best u, boundary flag).  The boundary flag is
        set when the best grid node sits on the edge of the sampled box.
        """
        w = self.frame.to_canonical(y)
        a, b = w[:-1], float(w[-1])
        vals = (self._nodes_u @ a - self._nodes_f * b
                - 0.5 * ((self._nodes_u ** 2).sum(axis=1) - self._nodes_f ** 2))
        best_flat = int(np.argmax(vals))
        idx = np.unravel_index(best_flat, self.values.shape)
        boundary = any(i == 0 or i == ax.size - 1 for i, ax in zip(idx, self.axes))
        u = np.array([ax[i] for i, ax in zip(idx, self.axes)])
        best = float(vals[best_flat])
        # Coordinate-wise golden-section sweeps inside the adjacent cells.
        for _ in range(3):
            for axis_i, ax in enumerate(self.axes):
                pos = int(np.searchsorted(ax, u[axis_i]))
                pos = min(max(pos, 0), ax.size - 1)
                lo = ax[max(pos - 1, 0)]
                hi = ax[min(pos + 1, ax.size - 1)]
                if hi - lo <= 0.0:
                    continue
                u_axis = self._golden(u, axis_i, lo, hi, a, b)
                cand = u.copy()
                cand[axis_i] = u_axis
                val = self._objective(cand, a, b)
                if val > best:
                    best = val
                    u = cand
        return best, u, boundary

    def _golden(self, u: np.ndarray, axis_i: int, lo: float, hi: float,
                a: np.ndarray, b: float) -> float:
        def val(t):
            cand = u.copy()
            cand[axis_i] = t
            return self._objective(cand, a, b)

        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)
        f1, f2 = val(x1), val(x2)
        for _ in range(40):
            if hi - lo < 1e-12 * (1.0 + abs(lo) + abs(hi)):
                break
            if f1 < f2:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = val(x2)
            else:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = val(x1)
        return 0.5 * (lo + hi)

    def psi(self, y) -> FitzEval:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.space.d,):
            raise DimensionMismatch("probe dimension mismatch")
        best, u, boundary = self._search(y)
        return FitzEval(value=best, maximizers=(self.point_at(u),),
                        lower_bound=True, boundary=boundary)

    def project(self, y) -> list[np.ndarray]:
        """Minimizers of the scalar square found on the sampled region.

        Raises EmptyProjection when the best point sits on the grid
        boundary: the infimum may then lie outside the representation and
        is reported rather than guessed.
        """
        y = np.asarray(y, dtype=float)
        _, u, boundary = self._search(y)
        if boundary:
            raise EmptyProjection("projection search hit the grid boundary")
        return [self.point_at(u)]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        w = self.frame.to_canonical(x)
        u, v = w[:-1], float(w[-1])
        for coord, ax in zip(u, self.axes):
            if coord < ax[0] - 1e-9 or coord > ax[-1] + 1e-9:
                return False
        return abs(v - self.f(u)) <= 1e-8 * (1.0 + float(np.linalg.norm(x)))


def mcshane_maximal_extension(sp: SSpace, points,
                              nodes_per_axis: int = 201,
                              inflate: float = 0.5,
                              tol: Tolerances = DEFAULT_TOLERANCES) -> LipschitzGraph:
    """Maximal 1-Lipschitz extension of a finite S-monotone set.

    The input points are mapped to canonical coordinates (u_i, f_i); the
    scalar McShane formula f(u) = min_i (f_i + |u - u_i|) is evaluated on a
    rectangular grid whose box inflates the data extent by ``inflate`` on
    each side.  Only scalar codomains (d - m = 1) are supported.
    """
    if sp.d - sp.m != 1:
        raise CodomainTooLarge(f"codomain dimension {sp.d - sp.m} is not 1")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != sp.d:
        raise DimensionMismatch("points do not match the space dimension")
    if not is_s_monotone(sp, pts, tol):
        raise NotMonotone("input points are not S-monotone")
    frame = sp.frame
    w = pts @ frame.v.T
    u_data = w[:, :-1]
    f_data = w[:, -1]
    axes = []
    for axis_i in range(sp.m):
        lo = float(u_data[:, axis_i].min())
        hi = float(u_data[:, axis_i].max())
        width = max(hi - lo, 1.0)
        axes.append(np.linspace(lo - inflate * width, hi + inflate * width,
                                nodes_per_axis))
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=1)
    dist = np.sqrt(((nodes[:, None, :] - u_data[None, :, :]) ** 2).sum(axis=2))
    values = (f_data[None, :] + dist).min(axis=1).reshape([ax.size for ax in axes])
    return LipschitzGraph(sp, axes, values, tol=tol, anchors=(u_data, f_data))


def psi_conjugate_at(sp: SSpace, g: FiniteSet, p,
                     tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Convex conjugate of the finite-set Fitzpatrick function at p.

    psi is the maximum of the affine pieces l_i(y) = <S x_i, y> - b_i with
    b_i = S(x_i, x_i)/2, so its conjugate is the linear program

        min sum_i lambda_i b_i   s.t.  sum_i lambda_i S x_i = p,
                                       lambda in the simplex,

    and equals +inf (returned as math.inf) when p lies outside the convex
    hull of the slopes.
    """
    if not isinstance(g, FiniteSet):
        raise ValidationError("conjugate evaluation needs the finite representation")
    p = np.asarray(p, dtype=float)
    if p.shape != (sp.d,):
        raise DimensionMismatch("conjugate argument dimension mismatch")
    n = g.points.shape[0]
    if n * (sp.d + 1) > 200000:
        raise DimensionCap("conjugate LP exceeds the size cap")
    slopes = g._sx  # rows are S x_i
    a = np.concatenate([slopes.T, np.ones((1, n))], axis=0)
    b = np.concatenate([p, [1.0]])
    res = lp_solve(LpProblem(c=g._b.copy(), a_eq=a, b_eq=b), tol=tol)
    if res.status != "optimal":
        return math.inf
    return float(res.value)
