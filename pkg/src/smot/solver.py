"""Discrete primal solvers, optimality certificates, and diagnostics.

The primal problem maximizes half the expected scalar square of the
cluster layer over martingale plans with a fixed target measure nu; the
dual minimizes the expected Fitzpatrick value over maximal S-monotone
sets.  A pair (plan, set) is optimal exactly when every support pair
(x, y) has x in the S-projection of y onto the set, which is what the
certificate checks, support point by support point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    AtomCapExceeded,
    DimensionCap,
    MarginalMismatch,
    NotPositiveDefinite,
    ValidationError,
)
from .fitzpatrick import AffineSubspace, MonotoneSet
from .gaussian import GaussianDecomposition, decompose
from .linalg import LpProblem, lp_solve
from .measures import DiscreteMeasure, MartingalePlan
from .sspace import SSpace

__all__ = [
    "SolverConfig",
    "Certificate",
    "SupportCheck",
    "ForwardCheck",
    "FirstOrderReport",
    "DualAffineCandidate",
    "solve_exact",
    "solve_local",
    "certify",
    "first_order_check",
    "ot_cross_check",
    "dual_affine_candidate",
]


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the discrete solvers; a fixed seed makes runs bit-identical."""

    max_clusters: int | None = None   # None: one per atom
    exact_atom_cap: int = 9
    restarts: int = 64
    max_iterations: int = 500
    seed: int = 0
    fractional_split: bool = True
    refine_steps: int = 200
    refine_top: int = 5
    tol: Tolerances = DEFAULT_TOLERANCES

    def __post_init__(self):
        for name in ("exact_atom_cap", "restarts", "max_iterations"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be at least 1")
        if self.max_clusters is not None and self.max_clusters < 1:
            raise ValidationError("max_clusters must be at least 1")


# ---------------------------------------------------------------------------
# exact solver: set-partition enumeration plus fractional refinement
# ---------------------------------------------------------------------------

def _partitions(n: int, max_blocks: int):
    """Restricted-growth-string enumeration of set partitions of n items."""
    a = [0] * n
    while True:
        yield a
        j = n - 1
        while j > 0:
            if a[j] <= max(a[:j]) and a[j] + 1 < max_blocks:
                break
            j -= 1
        if j == 0:
            return
        a[j] += 1
        for i in range(j + 1, n):
            a[i] = 0


def _assignment_value(sp: SSpace, atoms: np.ndarray, rows: np.ndarray,
                      cols: np.ndarray, masses: np.ndarray, drop: float) -> float:
    """Objective of sparse triplets: half of sum_k S(s_k, s_k) / p_k."""
    k = int(rows.max()) + 1
    p = np.bincount(rows, weights=masses, minlength=k)
    d = atoms.shape[1]
    s = np.empty((k, d))
    for axis in range(d):
        s[:, axis] = np.bincount(rows, weights=masses * atoms[cols, axis], minlength=k)
    live = p > drop
    if not live.any():
        return 0.0
    quad = np.einsum("ij,jk,ik->i", s[live], sp.s, s[live])
    return 0.5 * float((quad / p[live]).sum())


def _project_columns_to_simplex(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Euclidean projection of each column of w onto {v >= 0, sum v = q_j}."""
    k = w.shape[0]
    u = -np.sort(-w, axis=0)
    css = np.cumsum(u, axis=0) - q[None, :]
    idx = np.arange(1, k + 1)[:, None]
    cond = u - css / idx > 0.0
    rho = np.maximum(cond.sum(axis=0), 1)
    theta = css[rho - 1, np.arange(w.shape[1])] / rho
    return np.maximum(w - theta[None, :], 0.0)


def _refine_fractional(sp: SSpace, nu: DiscreteMeasure, labels: np.ndarray,
                       cfg: SolverConfig) -> tuple[float, np.ndarray]:
    """Projected-gradient ascent over fractional assignment weights.

    The parametrization fixes column sums at nu's weights and defines each
    cluster point as the barycenter of its column masses, so every iterate
    is a feasible plan.  The gradient of the objective in a weight w_kj is
    the affine piece S(x_k, y_j) - S(x_k, x_k)/2; an empty cluster's row
    uses S(y_j, y_j)/2, the marginal value of seeding it at the atom.
    The objective is an indefinite quadratic-over-linear, so the best
    iterate is tracked rather than assuming monotone ascent.
    """
    y = nu.atoms
    q = nu.weights
    n, d = y.shape
    k = int(labels.max()) + 1
    w = np.zeros((k, n))
    w[labels, np.arange(n)] = q
    drop = cfg.tol.drop
    y_sq = sp.scalar_squares(y)

    def objective(mat):
        p = mat.sum(axis=1)
        live = p > drop
        if not live.any():
            return 0.0
        s = mat @ y
        quad = np.einsum("ij,jk,ik->i", s[live], sp.s, s[live])
        return 0.5 * float((quad / p[live]).sum())

    best_val = objective(w)
    best_w = w.copy()
    data_scale = max(1.0, float(np.abs(y).max()) ** 2 * float(np.abs(sp.s).max()))
    alpha = 0.5 / data_scale
    for _ in range(cfg.refine_steps):
        p = w.sum(axis=1)
        live = p > drop
        s = w @ y
        grad = np.empty((k, n))
        if live.any():
            x = s[live] / p[live, None]
            xs = x @ sp.s
            grad[live] = xs @ y.T - 0.5 * np.einsum("ij,ij->i", xs, x)[:, None]
        if (~live).any():
            grad[~live] = 0.5 * y_sq[None, :]
        stepped = False
        while alpha > 1e-14:
            cand = _project_columns_to_simplex(w + alpha * grad, q)
            val = objective(cand)
            if val > best_val + 1e-15:
                w = cand
                best_val = val
                best_w = cand.copy()
                alpha *= 1.3
                stepped = True
                break
            alpha *= 0.5
        if not stepped:
            break
    return best_val, best_w


def _plan_from_matrix(nu: DiscreteMeasure, w: np.ndarray,
                      tol: Tolerances) -> MartingalePlan:
    rows, cols = np.nonzero(w > tol.drop)
    return MartingalePlan.from_assignment(nu, rows, cols, w[rows, cols], tol=tol)


def solve_exact(sp: SSpace, nu: DiscreteMeasure,
                cfg: SolverConfig = SolverConfig()) -> MartingalePlan:
    """Enumerate all cluster partitions of the atoms; optionally refine.

    Every set partition collapses each block to its barycenter, which is
    the best plan with that hard support structure; the enumeration is
    therefore exact over hard assignments.  With ``fractional_split`` the
    best partitions additionally seed a projected-gradient ascent over
    fractional weights, whose best iterate can only improve the value.
    """
    n = nu.n
    if n > cfg.exact_atom_cap:
        raise AtomCapExceeded(f"{n} atoms exceed the enumeration cap {cfg.exact_atom_cap}")
    kmax = min(cfg.max_clusters or n, n)
    q = nu.weights
    cols = np.arange(n)
    best: list[tuple[float, np.ndarray]] = []
    for labels in _partitions(n, kmax):
        rows = np.asarray(labels)
        val = _assignment_value(sp, nu.atoms, rows, cols, q, cfg.tol.drop)
        if len(best) < cfg.refine_top or val > best[-1][0]:
            best.append((val, rows.copy()))
            best.sort(key=lambda t: -t[0])
            del best[cfg.refine_top:]
    top_val, top_labels = best[0]
    if not cfg.fractional_split:
        w = np.zeros((int(top_labels.max()) + 1, n))
        w[top_labels, cols] = q
        return _plan_from_matrix(nu, w, cfg.tol)
    champion = None
    champion_val = -math.inf
    for val, labels in best:
        ref_val, ref_w = _refine_fractional(sp, nu, labels, cfg)
        if ref_val > champion_val:
            champion_val = ref_val
            champion = ref_w
    return _plan_from_matrix(nu, champion, cfg.tol)


# ---------------------------------------------------------------------------
# local solver: multi-start alternating reassignment
# ---------------------------------------------------------------------------

def _reassign(sp: SSpace, nu: DiscreteMeasure, centers: np.ndarray,
              cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Send each atom to the cluster(s) maximizing its affine piece.

    Ties within the tie tolerance split the atom's weight equally when
    fractional splitting is on, otherwise the lowest cluster index wins.
    Returns sparse triplets (rows, cols, masses).
    """
    xs = centers @ sp.s                      # rows are S x_k
    pieces = xs @ nu.atoms.T - 0.5 * np.einsum("ij,ij->i", xs, centers)[:, None]
    top = pieces.max(axis=0)
    cut = cfg.tol.tie * (1.0 + np.abs(top))
    tied = pieces >= (top - cut)[None, :]
    counts = tied.sum(axis=0)
    if not cfg.fractional_split:
        rows = np.argmax(tied, axis=0)
        return rows, np.arange(nu.n), nu.weights.copy()
    single = counts == 1
    rows = [np.argmax(tied[:, single], axis=0)]
    cols = [np.nonzero(single)[0]]
    masses = [nu.weights[single]]
    for j in np.nonzero(~single)[0]:
        ks = np.nonzero(tied[:, j])[0]
        rows.append(ks)
        cols.append(np.full(ks.size, j))
        masses.append(np.full(ks.size, nu.weights[j] / ks.size))
    return (np.concatenate(rows), np.concatenate(cols), np.concatenate(masses))


def _centers_from_triplets(nu: DiscreteMeasure, rows: np.ndarray, cols: np.ndarray,
                           masses: np.ndarray, drop: float,
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Barycenters of the live clusters, with rows relabeled consecutively."""
    k = int(rows.max()) + 1
    p = np.bincount(rows, weights=masses, minlength=k)
    live = np.nonzero(p > drop)[0]
    remap = np.full(k, -1, dtype=int)
    remap[live] = np.arange(live.size)
    keep = remap[rows] >= 0
    rows, cols, masses = remap[rows[keep]], cols[keep], masses[keep]
    kk = live.size
    p = np.bincount(rows, weights=masses, minlength=kk)
    centers = np.empty((kk, nu.d))
    for axis in range(nu.d):
        centers[:, axis] = np.bincount(rows, weights=masses * nu.atoms[cols, axis],
                                       minlength=kk) / p
    return centers, rows, cols, masses


def _hartigan_improve(sp: SSpace, nu: DiscreteMeasure, labels: np.ndarray,
                      kmax: int, drop: float, max_moves: int | None = None,
                      ) -> np.ndarray:
    """Steepest single-atom moves on a hard partition.

    Repeatedly moves the one atom whose relocation (to another cluster or
    to a fresh singleton) most improves the plan value, until no move
    helps.  Escapes the fixed points of the alternating scheme, which are
    stationary but not optimal for indefinite forms.
    """
    y = nu.atoms
    q = nu.weights
    n = nu.n
    labels = np.asarray(labels, dtype=int).copy()
    max_moves = max_moves if max_moves is not None else 8 * n
    a = q[:, None] * y
    aa = np.einsum("ij,jk,ik->i", a, sp.s, a)
    y_sq = sp.scalar_squares(y)
    idx = np.arange(n)
    for _ in range(max_moves):
        _, labels = np.unique(labels, return_inverse=True)
        k = int(labels.max()) + 1
        p = np.bincount(labels, weights=q, minlength=k)
        s = np.zeros((k, y.shape[1]))
        for axis in range(y.shape[1]):
            s[:, axis] = np.bincount(labels, weights=a[:, axis], minlength=k)
        ss_rows = s @ sp.s
        ss = np.einsum("ij,ij->i", ss_rows, s)
        cross = ss_rows @ a.T                               # (k, n)
        join = (ss[:, None] + 2.0 * cross + aa[None, :]) / (p[:, None] + q[None, :])
        gain = 0.5 * (join - (ss / p)[:, None])
        own = labels
        rem_ss = ss[own] - 2.0 * cross[own, idx] + aa
        p_rem = p[own] - q
        rem_val = np.where(p_rem > drop, rem_ss / np.maximum(p_rem, 1e-300), 0.0)
        loss = 0.5 * (ss[own] / p[own] - rem_val)
        delta = gain - loss[None, :]
        delta[own, idx] = -math.inf
        best_t = np.argmax(delta, axis=0)
        best_d = delta[best_t, idx]
        if k < kmax:
            split_d = 0.5 * q * y_sq - loss
            use_split = split_d > best_d
            best_d = np.where(use_split, split_d, best_d)
            best_t = np.where(use_split, k, best_t)
        j = int(np.argmax(best_d))
        scale = 1.0 + abs(float(ss.sum()))
        if best_d[j] <= 1e-13 * scale:
            break
        labels[j] = int(best_t[j])
    _, labels = np.unique(labels, return_inverse=True)
    return labels


_HARTIGAN_ATOM_LIMIT = 512


def solve_local(sp: SSpace, nu: DiscreteMeasure,
                cfg: SolverConfig = SolverConfig()) -> MartingalePlan:
    """Multi-start alternating solver.

    Each restart seeds clusters by random aggregation of the atoms (restart
    0 starts from one cluster per atom, restart 1 from a single cluster),
    then alternates reassignment by best affine piece with barycenter
    recentering.  The objective is indefinite, so no ascent is claimed: the
    best feasible configuration seen anywhere is returned, with value ties
    across restarts resolved in favor of the earlier restart.  The trivial
    single-cluster plan is always a candidate, so the solver cannot fail.
    """
    n = nu.n
    kmax = min(cfg.max_clusters or n, n)
    cols0 = np.arange(n)
    base_rows = np.zeros(n, dtype=int)
    best_val = _assignment_value(sp, nu.atoms, base_rows, cols0, nu.weights, cfg.tol.drop)
    best_trip = (base_rows, cols0, nu.weights.copy())

    # Positive canonical coordinates of the atoms: monotone sets are graphs
    # over them, so quantile strips along positive directions are natural
    # seed aggregations.
    u_pos = (nu.atoms @ sp.frame.v.T)[:, :sp.m] if sp.m > 0 else None

    def strip_labels(rng, k):
        if u_pos is None or k <= 1:
            return np.zeros(n, dtype=int)
        direction = rng.standard_normal(sp.m)
        direction /= max(float(np.linalg.norm(direction)), 1e-12)
        w = u_pos @ direction
        cuts = np.quantile(w, np.linspace(0.0, 1.0, k + 1)[1:-1])
        return np.searchsorted(cuts, w).astype(int)

    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        if r == 0:
            labels = cols0.copy() if kmax >= n else strip_labels(rng, kmax)
        elif r == 1:
            labels = np.zeros(n, dtype=int)
        elif r % 3 == 2 and n > 1:
            # Aggregate around a random subset of atoms: reassigning to
            # centers placed at atoms yields spread-out seed clusters.
            k_r = int(rng.integers(2, kmax + 1)) if kmax > 1 else 1
            seeds = rng.choice(n, size=min(k_r, n), replace=False)
            trip = _reassign(sp, nu, nu.atoms[seeds], cfg)
            labels = None
        elif r % 3 == 0:
            labels = strip_labels(rng, int(rng.integers(1, kmax + 1)))
        else:
            k_r = int(rng.integers(1, kmax + 1))
            labels = rng.integers(0, k_r, n)
        if labels is not None:
            trip = (labels, cols0, nu.weights.copy())
        seen: set = set()
        for _ in range(cfg.max_iterations):
            centers, rows, cols, masses = _centers_from_triplets(
                nu, *trip, cfg.tol.drop)
            # Score the current configuration (the seed itself on the first
            # pass): the objective is indefinite, so a reassignment step may
            # move away from the best plan seen.
            val = _assignment_value(sp, nu.atoms, rows, cols, masses, cfg.tol.drop)
            if val > best_val:
                best_val = val
                best_trip = (rows.copy(), cols.copy(), masses.copy())
            key = (rows.tobytes(), cols.tobytes(), masses.tobytes())
            if key in seen:  # fixed point or cycle: nothing new ahead
                break
            seen.add(key)
            trip = _reassign(sp, nu, centers, cfg)
        if n <= _HARTIGAN_ATOM_LIMIT:
            # Polish the converged configuration with single-atom moves;
            # the alternating fixed points are not local optima of the
            # partition objective when the form is indefinite.
            rows, cols, masses = trip
            hard = np.zeros(n, dtype=int)
            seen = np.full(n, -1.0)
            for rr, cc, mm in zip(rows, cols, masses):
                if mm > seen[cc]:
                    seen[cc] = mm
                    hard[cc] = rr
            _, hard = np.unique(hard, return_inverse=True)
            polished = _hartigan_improve(sp, nu, hard, kmax, cfg.tol.drop)
            val = _assignment_value(sp, nu.atoms, polished, cols0, nu.weights,
                                    cfg.tol.drop)
            if val > best_val:
                best_val = val
                best_trip = (polished, cols0, nu.weights.copy())
    rows, cols, masses = best_trip
    return MartingalePlan.from_assignment(nu, rows, cols, masses, tol=cfg.tol)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportCheck:
    cluster: int
    atom: int
    psi_minus_affine: float
    x_in_set: bool
    passed: bool
    inconclusive: bool = False


@dataclass(frozen=True)
class ForwardCheck:
    cluster: int
    atom: int
    eps: float
    member: bool


@dataclass(frozen=True)
class Certificate:
    """Machine-checkable optimality bundle for a (plan, set) pair.

    ``verdict`` is "certified" when the duality gap closes at the gap
    tolerance and every support pair attains the Fitzpatrick supremum with
    its cluster point in the set; "gap_open" when nothing failed but the
    gap (or a grid lower bound on the dual) prevents certification;
    "violated" when weak duality or a support check fails outright.
    """

    plan: MartingalePlan
    monotone_set: MonotoneSet
    primal_value: float
    dual_value: float
    gap: float
    support_check: tuple[SupportCheck, ...]
    forward_check: tuple[ForwardCheck, ...]
    eps: float
    verdict: str
    dual_is_lower_bound: bool = False


def certify(sp: SSpace, plan: MartingalePlan, g: MonotoneSet, nu: DiscreteMeasure,
            eps: float = 1e-3, tol: Tolerances = DEFAULT_TOLERANCES) -> Certificate:
    """Check the optimality conditions for a plan against a candidate set.

    The support check asks, for every support pair (x, y), that the
    affine piece at x attains psi_G(y) and that x lies in G; the forward
    check records eps-forward-set membership for the same pairs.  Grid
    lower bounds on psi (LipschitzGraph duals) are handled one-sidedly and
    cap the verdict at "gap_open".
    """
    if plan.nu is not nu:
        if (plan.nu.atoms.shape != nu.atoms.shape
                or np.abs(plan.nu.atoms - nu.atoms).max() > tol.marginal
                or np.abs(plan.nu.weights - nu.weights).max() > tol.marginal):
            raise MarginalMismatch("plan y-marginal does not match the given measure")
    primal = plan.value(sp)
    evals = [g.psi(y) for y in nu.atoms]
    lower = any(ev.lower_bound for ev in evals)
    finite = all(ev.is_finite for ev in evals)
    dual = float(np.dot(nu.weights, [ev.value for ev in evals])) if finite else math.inf
    gap = dual - primal if finite else math.inf

    support = []
    any_fail = False
    any_inconclusive = not finite
    for k, j, _w in plan.support_pairs():
        ev = evals[j]
        x = plan.clusters[k].x
        member = g.contains(x)
        y = nu.atoms[j]
        cut = tol.support * (1.0 + float(y @ y))
        if not ev.is_finite:
            support.append(SupportCheck(k, j, math.inf, member, passed=False,
                                        inconclusive=True))
            any_inconclusive = True
            continue
        resid = ev.value - g.affine_piece(x, y)
        if ev.lower_bound:
            # One-sided: the computed psi only bounds the true one from
            # below, so a large positive residual is a definite failure
            # while a small one is merely not disproved.
            failed = resid > cut or not member
            support.append(SupportCheck(k, j, float(resid), member,
                                        passed=not failed, inconclusive=not failed))
            any_inconclusive = True
            any_fail = any_fail or failed
        else:
            ok = abs(resid) <= cut and member
            support.append(SupportCheck(k, j, float(abs(resid)), member, passed=ok))
            any_fail = any_fail or not ok
    forward = []
    for k, j, _w in plan.support_pairs():
        x = plan.clusters[k].x
        try:
            member = g.q_eps_membership(x, nu.atoms[j], eps)
        except ValidationError:
            member = False
        forward.append(ForwardCheck(k, j, eps, member))

    weak_duality_broken = finite and not lower and (
        gap < -tol.weak_duality * (1.0 + abs(dual)))
    if any_fail or weak_duality_broken:
        verdict = "violated"
    elif (not lower and not any_inconclusive and finite
          and gap <= tol.gap * (1.0 + abs(dual))):
        verdict = "certified"
    else:
        verdict = "gap_open"
    return Certificate(plan=plan, monotone_set=g, primal_value=primal,
                       dual_value=dual, gap=gap, support_check=tuple(support),
                       forward_check=tuple(forward), eps=eps, verdict=verdict,
                       dual_is_lower_bound=lower)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FirstOrderReport:
    min_margin: float
    trials: int
    violated: bool
    witness: tuple[tuple[int, int, float], ...] | None = None


def first_order_check(sp: SSpace, plan: MartingalePlan, trials: int = 1000,
                      seed: int = 0, tol: Tolerances = DEFAULT_TOLERANCES,
                      ) -> FirstOrderReport:
    """Necessary first-order condition on measures carried by the support.

    For an optimal plan, every probe measure eta supported on the plan's
    support satisfies

        int { S(x, y) - S(x, x)/2 } d eta  >=  S(eta(y), eta(y)) / 2.

    The check samples random sub-supports and weights (all singletons are
    probed first) and reports the worst margin; a margin below the scaled
    tolerance is a witness of non-optimality.
    """
    pairs = list(plan.support_pairs())
    xs = np.array([plan.clusters[k].x for k, _j, _w in pairs])
    ys = np.array([plan.nu.atoms[j] for _k, j, _w in pairs])
    pieces = (np.einsum("ij,jk,ik->i", xs, sp.s, ys)
              - 0.5 * sp.scalar_squares(xs))
    rng = np.random.default_rng(seed)
    npairs = len(pairs)
    min_margin = math.inf
    witness = None
    violated = False
    for t in range(trials):
        if t < npairs:
            idx = np.array([t])
            weights = np.array([1.0])
        else:
            size = int(rng.integers(1, min(npairs, 6) + 1))
            idx = rng.choice(npairs, size=size, replace=False)
            raw = rng.random(size) + 1e-12
            weights = raw / raw.sum()
        lin = float(weights @ pieces[idx])
        mean_y = weights @ ys[idx]
        margin = lin - 0.5 * sp.scalar_square(mean_y)
        scale = 1.0 + abs(lin) + 0.5 * abs(sp.scalar_square(mean_y))
        if margin < min_margin:
            min_margin = margin
            witness = tuple((pairs[i][0], pairs[i][1], float(w))
                            for i, w in zip(idx, weights))
        if margin < -1e-8 * scale:
            violated = True
    return FirstOrderReport(min_margin=float(min_margin), trials=trials,
                            violated=violated,
                            witness=witness if violated else None)


def ot_cross_check(sp: SSpace, plan: MartingalePlan,
                   tol: Tolerances = DEFAULT_TOLERANCES,
                   max_vars: int = 20000) -> bool:
    """Is the plan an optimal unconstrained coupling of its own marginals?

    Solves the dense transport LP maximizing the expected bilinear form
    over all couplings of the plan's x-marginal with nu and compares the
    optimum to the plan's own objective.
    """
    nu = plan.nu
    xs = np.array([c.x for c in plan.clusters])
    ps = np.array([c.p for c in plan.clusters])
    k, n = xs.shape[0], nu.n
    if k * n > max_vars:
        raise DimensionCap(f"transport LP with {k * n} variables exceeds the cap")
    gain = xs @ sp.s @ nu.atoms.T
    plan_obj = 0.0
    for ki, j, w in plan.support_pairs():
        plan_obj += w * gain[ki, j]
    rows = []
    rhs = []
    for i in range(k):
        r = np.zeros(k * n)
        r[i * n:(i + 1) * n] = 1.0
        rows.append(r)
        rhs.append(ps[i])
    for j in range(n):
        r = np.zeros(k * n)
        r[j::n] = 1.0
        rows.append(r)
        rhs.append(nu.weights[j])
    problem = LpProblem(c=-gain.ravel(), a_eq=np.array(rows), b_eq=np.array(rhs))
    res = lp_solve(problem, tol=tol)
    if res.status != "optimal":
        raise ValidationError(f"transport LP unexpectedly {res.status}")
    best = -res.value
    return bool(abs(best - plan_obj) <= 1e-8 * (1.0 + abs(best)))


@dataclass(frozen=True)
class DualAffineCandidate:
    monotone_set: AffineSubspace
    dual_value: float
    martingale_residual: float
    decomposition: GaussianDecomposition


def dual_affine_candidate(sp: SSpace, nu: DiscreteMeasure,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> DualAffineCandidate:
    """Affine dual candidate from the covariance split of nu.

    Builds the affine set through nu's barycenter with the idempotent of
    the Gaussian solution for nu's covariance, evaluates the dual value
    sum_j q_j psi_G(y_j), and reports the worst deviation of any fiber's
    conditional atom mean from its cluster point.  A tiny residual means
    the linear map already has the martingale property on nu, so the
    affine candidate is exactly optimal for this measure.
    """
    cov = nu.covariance()
    try:
        dec = decompose(sp, cov, nu.barycenter(), tol=tol)
    except NotPositiveDefinite:
        raise NotPositiveDefinite(
            "empirical covariance is singular; the affine candidate needs a "
            "positive-definite covariance") from None
    g = AffineSubspace(sp, dec.mean, dec.p, tol=tol)
    xs = dec.plan_map_rows(nu.atoms)
    # psi at an atom is the affine piece of its own projection.
    sx = xs @ sp.s
    vals = np.einsum("ij,ij->i", sx, nu.atoms) - 0.5 * np.einsum("ij,ij->i", sx, xs)
    dual = float(nu.weights @ vals)
    fibers: dict[tuple, list[int]] = {}
    for j in range(nu.n):
        key = tuple(np.round(xs[j], 9))
        fibers.setdefault(key, []).append(j)
    residual = 0.0
    for idx in fibers.values():
        idx = np.array(idx)
        wts = nu.weights[idx]
        mean_y = wts @ nu.atoms[idx] / wts.sum()
        mean_x = wts @ xs[idx] / wts.sum()
        residual = max(residual, float(np.linalg.norm(mean_y - mean_x)))
    return DualAffineCandidate(monotone_set=g, dual_value=dual,
                               martingale_residual=residual, decomposition=dec)
