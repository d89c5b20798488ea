#!/usr/bin/env python3
"""Environment parsing and exact-rational helpers for rdnet."""

import logging
import math
import os
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional, TypeVar, Union

logger = logging.getLogger(__name__)

E = TypeVar("E", bound=Enum)
N = TypeVar("N", int, float)

BOOL_TRUE = frozenset(('true', '1', 'yes', 'on'))
BOOL_FALSE = frozenset(('false', '0', 'no', 'off'))


def parse_bool(env_var: str, default: bool = False) -> bool:
    """Read a yes/no switch; unrecognized words count as False.

    Args:
        env_var: Name of the variable to read.
        default: Returned when the variable is unset.

    Returns:
        True for one of true/1/yes/on, in any case.
    """
    raw = os.environ.get(env_var)
    if raw is None:
        return default
    word = raw.strip().lower()
    if word not in BOOL_TRUE | BOOL_FALSE:
        logger.warning(f"{env_var}='{raw}' is not a recognized boolean, treating as False")
    return word in BOOL_TRUE


def _parse_number(env_var: str, cast: Callable[[str], N], default: N, min_val: Optional[N]) -> N:
    raw = os.environ.get(env_var)
    if raw is None:
        return default
    try:
        value = cast(raw.strip())
    except ValueError:
        logger.warning(f"{env_var}='{raw}' is not a valid {cast.__name__}, using default {default}")
        return default
    if min_val is not None and value < min_val:
        logger.warning(f"{env_var}={value} is below minimum {min_val}, using minimum")
        return min_val
    return value


def parse_float(env_var: str, default: float, min_val: Optional[float] = None) -> float:
    """Float setting clamped to ``min_val``.

    Args:
        env_var: Name of the variable to read.
        default: Returned when the variable is unset or not a number.
        min_val: Lower clamp, or None for no bound.

    Returns:
        The parsed value.
    """
    return _parse_number(env_var, float, default, min_val)


def parse_int(env_var: str, default: int, min_val: Optional[int] = None) -> int:
    """Integer setting clamped to ``min_val``.

    Args:
        env_var: Name of the variable to read.
        default: Returned when the variable is unset or not an integer.
        min_val: Lower clamp, or None for no bound.

    Returns:
        The parsed value.
    """
    return _parse_number(env_var, int, default, min_val)


def parse_choice(env_var: str, enum_cls: type[E], default: E) -> E:
    """Parse an enum-valued environment variable by its value string.

    Args:
        env_var: Name of the variable to read.
        enum_cls: Enum whose member values are the accepted words.
        default: Member returned when the variable is unset or unknown.
    """
    raw = os.environ.get(env_var)
    if raw is None:
        return default
    try:
        return enum_cls(raw.strip().lower())
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        logger.warning(f"{env_var}='{raw}' is not one of ({choices}), using default {default.value}")
        return default


def to_fraction(value: Union[int, float, str, Fraction]) -> Fraction:
    """Convert user input to an exact rational.

    Args:
        value: Integer, float, Fraction or a string such as "3/2" or "0.1".
            Strings go through ``Fraction`` directly so "0.1" stays 1/10;
            floats go through their shortest repr.

    Raises:
        ValueError: non-finite float or malformed string
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot convert {value} to a rational")
        return Fraction(repr(value))
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    """Render an exact rational as "p/q" (or "p" for integers)."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_decimal(value: Fraction) -> str:
    """Render a rational with a finite decimal expansion as a decimal literal."""
    for digits in range(64):
        scaled = value * 10 ** digits
        if scaled.denominator == 1:
            break
    else:
        raise ValueError(f"{value} has no short decimal expansion")
    numerator = scaled.numerator
    sign = "-" if numerator < 0 else ""
    text = str(abs(numerator)).rjust(digits + 1, "0")
    if digits == 0:
        return sign + text
    return f"{sign}{text[:-digits]}.{text[-digits:]}"
