#!/usr/bin/env python3
"""Configuration management for rdnet."""

import os
from dataclasses import dataclass, field

from .constants import (
    FaceAverage,
    QUASI_POSITIVITY_SAMPLES,
    QUASI_POSITIVITY_SEED,
    ReactionMode,
    Scheme,
    VALIDATION_SAMPLES,
    VALIDATION_SEED,
)
from .errors import ConfigError
from .utils import parse_bool, parse_choice, parse_float, parse_int


@dataclass
class SolverConfig:
    """Time integration settings."""
    scheme: Scheme = field(default_factory=lambda: parse_choice("RDNET_SCHEME", Scheme, Scheme.EXPLICIT))
    t_end: float = field(default_factory=lambda: parse_float("RDNET_T_END", 1.0, 0))
    dt_max: float = field(default_factory=lambda: parse_float("RDNET_DT_MAX", 1e-2, 0))
    safety: float = field(default_factory=lambda: parse_float("RDNET_SAFETY", 0.9, 0))
    cg_tol: float = field(default_factory=lambda: parse_float("RDNET_CG_TOL", 1e-12, 0))
    cg_max_iters: int = field(default_factory=lambda: parse_int("RDNET_CG_MAX_ITERS", 1000, 1))
    output_every: int = field(default_factory=lambda: parse_int("RDNET_OUTPUT_EVERY", 10, 1))
    filtration_mode: bool = field(default_factory=lambda: parse_bool("RDNET_FILTRATION", False))
    reaction_mode: ReactionMode = field(
        default_factory=lambda: parse_choice("RDNET_REACTION_MODE", ReactionMode, ReactionMode.STRICT))
    face_average: FaceAverage = field(
        default_factory=lambda: parse_choice("RDNET_FACE_AVERAGE", FaceAverage, FaceAverage.ARITHMETIC))
    rescale: bool = field(default_factory=lambda: parse_bool("RDNET_RESCALE", False))

    def validate(self) -> "SolverConfig":
        """Check invariants; returns self so calls can be chained.

        Raises:
            ConfigError: on the first violated setting
        """
        if not self.t_end > 0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if not self.dt_max > 0:
            raise ConfigError(f"dt_max must be positive, got {self.dt_max}")
        if not 0 < self.safety <= 1:
            raise ConfigError(f"safety must lie in (0, 1], got {self.safety}")
        if not self.cg_tol > 0:
            raise ConfigError(f"cg_tol must be positive, got {self.cg_tol}")
        if self.cg_max_iters < 1:
            raise ConfigError(f"cg_max_iters must be at least 1, got {self.cg_max_iters}")
        if self.output_every < 1:
            raise ConfigError(f"output_every must be at least 1, got {self.output_every}")
        for name, enum_cls in (("scheme", Scheme), ("reaction_mode", ReactionMode),
                               ("face_average", FaceAverage)):
            value = getattr(self, name)
            if not isinstance(value, enum_cls):
                try:
                    setattr(self, name, enum_cls(value))
                except ValueError:
                    raise ConfigError(f"{name} must be one of {[m.value for m in enum_cls]}, got {value!r}") from None
        return self


@dataclass
class AnalysisConfig:
    """Sampling settings for randomized network checks."""
    quasi_positivity_samples: int = field(
        default_factory=lambda: parse_int("RDNET_QP_SAMPLES", QUASI_POSITIVITY_SAMPLES, 1))
    quasi_positivity_seed: int = field(
        default_factory=lambda: parse_int("RDNET_QP_SEED", QUASI_POSITIVITY_SEED))
    validation_samples: int = field(
        default_factory=lambda: parse_int("RDNET_VALIDATION_SAMPLES", VALIDATION_SAMPLES, 1))
    validation_seed: int = field(
        default_factory=lambda: parse_int("RDNET_VALIDATION_SEED", VALIDATION_SEED))


@dataclass
class RuntimeConfig:
    """Process-level settings."""
    threads: int = field(default_factory=lambda: parse_int("RDNET_THREADS", os.cpu_count() or 1, 1))
    debug: bool = field(default_factory=lambda: parse_bool("RDNET_DEBUG", False))


@dataclass
class Config:
    """Main configuration container."""
    solver: SolverConfig = field(default_factory=SolverConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)

    @classmethod
    def from_environment(cls) -> "Config":
        """Create configuration from environment variables."""
        return cls()
