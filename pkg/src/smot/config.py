"""Centralized numerical tolerances.

Every tolerance used by a check anywhere in the package lives here so that
reports can name them and the CLI can override them one by one.  Quadratic
quantities (scalar squares, projection residuals) are compared with scale
factors of the form (1 + |y|^2); those factors are applied at the call
sites, the raw constants live in this table.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    sym: float = 1e-10           # matrix symmetry, relative to matrix norm
    eig: float = 1e-10           # eigen reconstruction, relative
    pd: float = 1e-12            # positive-definiteness floor
    lp: float = 1e-9             # simplex feasibility and pricing
    rank: float = 1e-8           # rank decisions, relative to largest singular value
    psd: float = 1e-9            # semidefiniteness margins for matrix inequalities
    proj: float = 1e-8           # projection attainment, scaled by 1 + |y|^2
    merge: float = 1e-12         # atom merge distance
    marginal: float = 1e-10      # plan marginal agreement with the target measure
    martingale: float = 1e-10    # barycenter constraint, scaled by 1 + |x|
    value: float = 1e-9          # plan value cross-check between the two integrals
    tie: float = 1e-9            # assignment tie detection in the local solver
    support: float = 1e-8        # certificate support checks, scaled by 1 + |y|^2
    weak_duality: float = 1e-8   # allowed negative slack in dual - primal
    gap: float = 1e-6            # certification gap, relative to 1 + |dual|
    drop: float = 1e-12          # cluster mass floor

    def replace(self, **overrides: float) -> "Tolerances":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise KeyError(f"unknown tolerance name(s): {sorted(unknown)}")
        return dataclasses.replace(self, **overrides)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


DEFAULT_TOLERANCES = Tolerances()

# Dense-kernel size limits.  The eigensolver and the simplex are written for
# desk-scale problems; anything larger should not silently crawl.
EIG_DIM_CAP = 64
LP_VAR_CAP = 20000
LP_ROW_CAP = 2000
