#!/usr/bin/env python3
"""Configuration overrides for rdnet.

Reads a flat ``key=value`` solver file and overlays it on top of
environment-based defaults.
"""

import logging
from dataclasses import fields
from enum import Enum
from pathlib import Path
from typing import Any, Union

from .config import Config, SolverConfig
from .errors import ConfigError
from .utils import BOOL_FALSE, BOOL_TRUE

logger = logging.getLogger(__name__)

class ConfigOverrideManager:
    """Loads solver overrides from a key=value file."""

    @staticmethod
    def load_overrides(path: Union[str, Path]) -> dict:
        """Read overrides from a flat key=value file.

        Blank lines and '#' comments are ignored.

        Args:
            path: Settings file, one ``field = value`` per line.

        Returns:
            Field names mapped to their unparsed values.

        Raises:
            FileNotFoundError: file does not exist
            ConfigError: a line has no '='
        """
        overrides: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep or not key.strip():
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                overrides[key.strip()] = value.strip()
        return overrides

    @staticmethod
    def _coerce(current: Any, value: str, key: str) -> Any:
        """Convert a string to the type of the current field value."""
        try:
            if isinstance(current, bool):
                lower = value.lower()
                if lower not in BOOL_TRUE | BOOL_FALSE:
                    raise ValueError(value)
                return lower in BOOL_TRUE
            if isinstance(current, Enum):
                return type(current)(value)
            if isinstance(current, int):
                return int(value)
            if isinstance(current, float):
                return float(value)
        except ValueError:
            raise ConfigError(f"invalid value for {key}: {value!r}") from None
        return value

    @staticmethod
    def _apply_overrides(solver: SolverConfig, overrides: dict) -> None:
        """Set each known solver field from its string value; unknown keys are logged and skipped."""
        known = {f.name for f in fields(solver)}
        for key, text in overrides.items():
            if key not in known:
                logger.warning(f"Ignoring unknown setting '{key}'")
                continue
            setattr(solver, key, ConfigOverrideManager._coerce(getattr(solver, key), text, key))

    @staticmethod
    def apply_file(solver: SolverConfig, path: Union[str, Path]) -> SolverConfig:
        """Overlay a key=value file on a solver configuration and validate it.

        Args:
            solver: Configuration modified in place.
            path: Settings file read by ``load_overrides``.

        Returns:
            The same configuration, validated.

        Raises:
            ConfigError: malformed line, bad value or invalid result
        """
        overrides = ConfigOverrideManager.load_overrides(path)
        ConfigOverrideManager._apply_overrides(solver, overrides)
        logger.debug(f"Applied {len(overrides)} solver setting(s) from {path}")
        return solver.validate()

    @staticmethod
    def get_effective_config(path: Union[str, Path, None] = None) -> Config:
        """Build a Config from environment variables, then overlay a solver file.

        Args:
            path: Optional settings file; without it only the environment applies.

        Returns:
            A Config whose solver section has been validated.
        """
        config = Config.from_environment()
        if path is not None:
            ConfigOverrideManager.apply_file(config.solver, path)
        else:
            config.solver.validate()
        return config
