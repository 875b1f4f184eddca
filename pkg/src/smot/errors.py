"""Exception hierarchy.

Validation errors signal bad inputs (CLI exit 2); numerical errors signal a
computation that could not meet its accuracy contract (CLI exit 3);
evaluation errors signal well-posed queries whose answer does not exist or
is not representable (unbounded values, unattained infima).
"""


class SmotError(Exception):
    """Base class for all package errors."""


class ValidationError(SmotError):
    """Input fails a documented precondition."""


class NotSymmetric(ValidationError):
    pass


class SingularS(ValidationError):
    pass


class NotPositiveDefinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DimensionCap(ValidationError):
    pass


class AtomCapExceeded(ValidationError):
    pass


class MarginalMismatch(ValidationError):
    pass


class NotMonotone(ValidationError):
    pass


class CodomainTooLarge(ValidationError):
    pass


class NumericalError(SmotError):
    """Computation failed to meet its accuracy contract."""


class NoConvergence(NumericalError):
    pass


class CycleGuard(NumericalError):
    pass


class SignatureMismatch(NumericalError):
    pass


class MartingaleViolated(NumericalError):
    pass


class EvaluationError(SmotError):
    """Query is valid but has no finite or attained answer."""


class UnboundedBelow(EvaluationError):
    pass


class EmptyProjection(EvaluationError):
    pass


class BoundaryPoint(EvaluationError):
    pass
