#!/usr/bin/env python3
"""Exception hierarchy for rdnet."""

from typing import Optional


class RdnetError(Exception):
    """Base class for all rdnet errors."""


class ParseError(RdnetError):
    """Syntax error in a network file or expression.

    Positions are 1-based and point into the source text.
    """

    def __init__(self, message: str, line: int, column: int, token: Optional[str] = None):
        self.message = message
        self.line = line
        self.column = column
        self.token = token
        where = f"line {line}, column {column}"
        if token is not None:
            where += f" near '{token}'"
        super().__init__(f"{where}: {message}")


class ValidationError(RdnetError):
    """Input is well-formed but violates a model invariant."""


class DimensionMismatch(ValidationError):
    """Array or vector sizes disagree."""


class ConfigError(ValidationError):
    """Invalid solver or runtime configuration."""


class DomainError(RdnetError):
    """Argument outside the mathematical domain of an operation."""


class UnboundVariable(DomainError):
    """Expression references a variable missing from the environment."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable '{name}'")


class ExponentRelationViolated(DomainError):
    """Hölder exponents do not satisfy 1/q = (1-alpha)/r + alpha/s."""


class LinearSolveFailure(RdnetError):
    """Iterative linear solver did not converge."""


class NonFiniteState(RdnetError):
    """NaN or infinite concentration produced by a step."""
