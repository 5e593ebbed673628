"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`SmoothGofError`, so callers (and the CLI exit-code mapping) can
tell library failures apart from programming errors.
"""


class SmoothGofError(Exception):
    """Base class for all package errors."""


class InvalidIntervalError(SmoothGofError, ValueError):
    pass


class DomainError(SmoothGofError, ValueError):
    pass


class EvaluationError(SmoothGofError, ArithmeticError):
    pass


class NotPositiveDefiniteError(SmoothGofError, ArithmeticError):
    """Raised when a matrix expected to be SPD is not.

    ``minor`` is the 1-based index of the failing leading minor when known.
    """

    def __init__(self, message, minor=None):
        super().__init__(message)
        self.minor = minor


class ParameterError(SmoothGofError, ValueError):
    pass


class IllPosedModelError(SmoothGofError, ArithmeticError):
    pass


class EstimationError(SmoothGofError, RuntimeError):
    pass


class ConvergenceError(EstimationError):
    """Optimizer ran out of iterations; ``best`` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateMomentError(SmoothGofError, ArithmeticError):
    pass


class DegenerateLineError(SmoothGofError, ArithmeticError):
    pass


class SupportViolationError(SmoothGofError, ValueError):
    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class SupportMismatchError(SmoothGofError, ValueError):
    pass


class SpanDegeneracyError(SmoothGofError, ArithmeticError):
    pass


class ComplexityGuardError(SmoothGofError, ValueError):
    pass


class StateError(SmoothGofError, RuntimeError):
    pass


class SimulationIntegrityError(SmoothGofError, RuntimeError):
    def __init__(self, message, failures=0, attempts=0):
        super().__init__(message)
        self.failures = failures
        self.attempts = attempts


class FormatError(SmoothGofError, ValueError):
    pass


class DataError(SmoothGofError, ValueError):
    pass
