"""Exception hierarchy shared by every module."""


class NonmonoError(Exception):
    """Base class for all package errors."""


class InvalidInput(NonmonoError, ValueError):
    pass


class NonFiniteValue(NonmonoError, ArithmeticError):
    """An objective or gradient evaluated to NaN or infinity."""


class UnknownProblem(NonmonoError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidDimension(NonmonoError, ValueError):
    pass


class SubproblemNotConverged(NonmonoError):
    """The dual solver hit its iteration cap with the gap above tolerance.

    The best iterate found is attached as ``solution`` so callers can
    still inspect it.
    """

    def __init__(self, message, solution=None, gap=float("nan")):
        super().__init__(message)
        self.solution = solution
        self.gap = gap


class DirectionConditionViolated(NonmonoError):
    pass


class StepSizeTooSmall(NonmonoError):
    pass


class EmptyFront(NonmonoError, ValueError):
    pass


class ParseError(NonmonoError, ValueError):
    """Malformed input file; the message names the offending line."""
