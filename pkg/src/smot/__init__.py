"""Backward martingale optimal transport in pseudo-Euclidean spaces.

Primal: maximize half the expected scalar square of the predecessor layer
over martingale couplings with a fixed terminal law.  Dual: minimize the
expected Fitzpatrick value over maximal S-monotone sets.  The package
provides the S-space geometry, discrete and Gaussian solvers, certificate
machinery tying the two together, and a CLI (``smot``).
"""

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import SmotError
from .fitzpatrick import (
    AffineSubspace,
    FiniteSet,
    FitzEval,
    LipschitzGraph,
    MonotoneSet,
    is_s_monotone,
    is_strictly_monotone,
    mcshane_maximal_extension,
    psi_conjugate_at,
)
from .gaussian import GaussianDecomposition, decompose, pca_directions
from .linalg import EigenResult, LpProblem, LpResult, lp_solve, rank_tol, spd_sqrt, sym_eig
from .measures import DiscreteMeasure, MartingalePlan, convex_order_check
from .solver import (
    Certificate,
    SolverConfig,
    certify,
    dual_affine_candidate,
    first_order_check,
    ot_cross_check,
    solve_exact,
    solve_local,
)
from .sspace import CanonicalFrame, SSpace, make_sspace

__version__ = "0.1.0"

__all__ = [
    "AffineSubspace",
    "CanonicalFrame",
    "Certificate",
    "DEFAULT_TOLERANCES",
    "DiscreteMeasure",
    "EigenResult",
    "FiniteSet",
    "FitzEval",
    "GaussianDecomposition",
    "LipschitzGraph",
    "LpProblem",
    "LpResult",
    "MartingalePlan",
    "MonotoneSet",
    "SSpace",
    "SmotError",
    "SolverConfig",
    "Tolerances",
    "certify",
    "convex_order_check",
    "decompose",
    "dual_affine_candidate",
    "first_order_check",
    "is_s_monotone",
    "is_strictly_monotone",
    "lp_solve",
    "make_sspace",
    "mcshane_maximal_extension",
    "ot_cross_check",
    "pca_directions",
    "psi_conjugate_at",
    "rank_tol",
    "solve_exact",
    "solve_local",
    "spd_sqrt",
    "sym_eig",
    "__version__",
]
