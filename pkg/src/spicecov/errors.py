"""Exception hierarchy shared by every module of the package."""


class SpiceError(ValueError):
    """Base class for all errors raised by spicecov."""


class NotPositiveDefinite(SpiceError):
    pass


class DimensionMismatch(SpiceError):
    pass


class ConvergenceFailure(SpiceError):
    pass


class NonPositiveVariance(SpiceError):
    pass


class TooFewObservations(SpiceError):
    pass


class TooFewValues(SpiceError):
    pass


class IndexOutOfRange(SpiceError, IndexError):
    pass


class DegenerateModel(SpiceError):
    pass


class AllFitsFailed(SpiceError):
    pass


class MissingLabels(SpiceError):
    pass


class MissingClass(SpiceError):
    pass


class InsufficientClassCount(SpiceError):
    pass


class InvariantViolation(AssertionError):
    """An always-on internal check failed (descent or positive definiteness).

    Not a ``SpiceError``: it signals a bug, so callers that skip failed fits
    do not swallow it.
    """
