"""Sublinear expectations over finite ambiguity sets, the G-CLT and the G-heat equation."""

from sublim.errors import (
    ConfigError,
    DomainError,
    EvaluationError,
    ExprError,
    NumericError,
    ParameterError,
    StateSpaceError,
    SublimError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "EvaluationError",
    "ExprError",
    "NumericError",
    "ParameterError",
    "StateSpaceError",
    "SublimError",
]
