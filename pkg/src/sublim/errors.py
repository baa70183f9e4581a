"""Exception hierarchy shared by all modules."""


class SublimError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SublimError, ValueError):
    """An argument is outside its admissible range."""


class EvaluationError(SublimError, ValueError):
    """A function returned a non-finite value at a point where it was evaluated."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class StateSpaceError(SublimError):
    """The exact enumerator would exceed its reachable-state cap."""


class DomainError(SublimError, ValueError):
    """A computational grid does not cover the region the operation needs."""


class NumericError(SublimError, ArithmeticError):
    """A solver produced a non-finite intermediate value."""


class ExprError(SublimError, ValueError):
    """Syntax or evaluation error in a test-function expression.

    ``offset`` is the byte offset into the source text, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(SublimError, ValueError):
    """A run configuration is malformed; ``where`` locates the problem."""

    def __init__(self, message, where=None):
        if where:
            message = f"{where}: {message}"
        super().__init__(message)
        self.where = where
