"""Exception types raised across the package."""


class FusionError(Exception):
    """Base class for all package errors."""


class InvalidInput(FusionError, ValueError):
    pass


class InsufficientData(FusionError, ValueError):
    pass


class NumericalFailure(FusionError, ArithmeticError):
    pass


class InfeasiblePoint(FusionError, ValueError):
    """A point lies on or outside the unit lp ball where the barrier is undefined."""


class UndefinedMetric(FusionError, ValueError):
    pass


class ParseError(FusionError, ValueError):
    pass


class DataIOError(FusionError, OSError):
    pass


class RunFailed(FusionError, RuntimeError):
    pass
