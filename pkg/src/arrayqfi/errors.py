"""Exception hierarchy shared by every module."""


class ArrayQfiError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidParameter(ArrayQfiError, ValueError):
    """An input violates a type invariant (negative spacing, p outside [0, 1], ...)."""


class DegenerateArray(ArrayQfiError, ValueError):
    pass


class ZeroInformation(ArrayQfiError, ValueError):
    """The Cramer-Rao bound is undefined because the Fisher information is zero."""


class TruncationTooSmall(ArrayQfiError, ValueError):
    pass


class EngineLimit(ArrayQfiError):
    pass


class DimensionLimit(ArrayQfiError):
    pass


class NumericalBreakdown(ArrayQfiError, ArithmeticError):
    pass


class IdentityViolation(ArrayQfiError, AssertionError):
    """A combinatorial identity failed; the message names the identity and permutation."""


class StepTooLarge(ArrayQfiError):
    pass


class QuadratureDivergence(ArrayQfiError):
    pass


class UnsupportedStretch(ArrayQfiError, ValueError):
    pass
