"""Exception hierarchy shared by all wassbary modules."""


class WassBaryError(Exception):
    """Base class for library errors."""


class MathError(WassBaryError):
    """A numerical precondition failed (CLI exit code 3)."""


class NotPSD(MathError):
    pass


class SingularMatrix(MathError):
    pass


class DimMismatch(WassBaryError, ValueError):
    pass


class EigenNoConvergence(MathError):
    pass


class NotCommuting(MathError):
    pass


class OutOfRange(WassBaryError, ValueError):
    pass


class TooLarge(WassBaryError, ValueError):
    pass


class TooShort(WassBaryError, ValueError):
    pass


class InvalidProblem(WassBaryError, ValueError):
    """Structural problem with the measures or weights (CLI exit code 2)."""


class MaxIterExceeded(UserWarning):
    """Emitted (not raised) when a solve hits ``max_iter``; the result is still returned."""
