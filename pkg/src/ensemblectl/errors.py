"""Exception hierarchy shared across the package."""


class EnsembleError(Exception):
    """Base class for every error raised by ensemblectl."""


class InputError(EnsembleError, ValueError):
    """Malformed or inconsistent input (shapes, non-finite entries, bad ranges)."""


class PreconditionError(EnsembleError):
    """An operation was called on a system outside its domain of validity."""


class RoutingError(PreconditionError):
    """The system belongs to a different analysis path than the one invoked."""


class IllConditionedError(EnsembleError):
    """A numerical decomposition could not be made with confidence.

    ``estimate`` carries the offending condition number (or separation) when known.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class NumericRangeError(EnsembleError, ArithmeticError):
    """Overflow or loss of range during assembly or propagation."""


class UnreachableTargetError(EnsembleError):
    """The target has no component in the retained numerical range."""


class UnsupportedError(EnsembleError):
    """Requested a rule or case the implementation deliberately does not decide."""


class UnknownExampleError(EnsembleError, LookupError):
    """Unknown built-in example name."""
