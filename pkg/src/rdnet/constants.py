#!/usr/bin/env python3
"""Constants and enumerations for rdnet."""

from enum import Enum
from fractions import Fraction
from typing import Final

# Diffusivity validation (sampling on the admissible box)
VALIDATION_SAMPLES: Final[int] = 10_000
VALIDATION_SEED: Final[int] = 1729
DEFAULT_C_BOX: Final[tuple[float, float]] = (0.0, 100.0)
DEFAULT_T_BOX: Final[tuple[float, float]] = (0.0, 10.0)
DEFAULT_X_BOX: Final[tuple[float, float]] = (0.0, 1.0)
DEFAULT_DIFFUSIVITY: Final[Fraction] = Fraction(1)

# Analysis
QUASI_POSITIVITY_SAMPLES: Final[int] = 1000
QUASI_POSITIVITY_SEED: Final[int] = 7
QUASI_POSITIVITY_FACE_MAX: Final[float] = 10.0
QUASI_POSITIVITY_TOL: Final[float] = 1e-12
MAX_VERTEX_SPECIES: Final[int] = 16

# Certificates
BOOTSTRAP_CAP: Final[Fraction] = Fraction(1000)
BOOTSTRAP_MAX_STEPS: Final[int] = 1_000_000
BOOTSTRAP_TRAP_STEPS: Final[int] = 32
CERTIFICATE_TRACE_CAP: Final[Fraction] = Fraction(100)
DIM_SCAN_LIMIT: Final[int] = 10_000

# Numerics
HOLDER_TOLERANCE: Final[float] = 1e-12
QUADRATURE_TOL: Final[float] = 1e-12
QUADRATURE_PANELS: Final[int] = 16
QUADRATURE_ORDER: Final[int] = 8
MAX_STEP_HALVINGS: Final[int] = 40
REACTION_MASS_FLOOR: Final[float] = 1e-6

# Exit codes
EXIT_OK: Final[int] = 0
EXIT_DOMAIN_FAILURE: Final[int] = 1
EXIT_USAGE: Final[int] = 2


class DiffusivityKind(str, Enum):
    """Dependence structure of a diffusivity expression."""
    CONSTANT = "constant"
    OWN_CONCENTRATION = "own_concentration"
    GENERAL = "general"


class Direction(str, Enum):
    """Reaction arrow as written in a network file."""
    REVERSIBLE = "<->"
    FORWARD = "->"
    BACKWARD = "<-"


class ProblemKindName(str, Enum):
    """Reaction systems the existence conditions are stated for."""
    ROTHE = "rothe"
    NETWORK = "network"
    GENERALIZED_ROTHE = "generalized"


class DiffusivityClass(str, Enum):
    """Hypothesis regime of the diffusivities."""
    GENERAL = "general"
    OWN = "own"

    @classmethod
    def from_kinds(cls, kinds) -> "DiffusivityClass":
        """Own-concentration class iff no diffusivity is general."""
        if any(kind == DiffusivityKind.GENERAL for kind in kinds):
            return cls.GENERAL
        return cls.OWN


class Relation(str, Enum):
    """Relation symbol of a certificate condition."""
    LT = "<"
    LE = "<="
    EQ = "="

    def holds(self, lhs, rhs) -> bool:
        if self is Relation.LT:
            return lhs < rhs
        if self is Relation.LE:
            return lhs <= rhs
        return lhs == rhs


class BootstrapOutcome(str, Enum):
    """How a bootstrap exponent sequence ended."""
    DIVERGED = "diverged"
    STALLED = "stalled"
    INFEASIBLE = "infeasible"


class Scheme(str, Enum):
    """Time discretization of the diffusion operator."""
    EXPLICIT = "explicit"
    SEMI_IMPLICIT = "semi_implicit_diffusion"


class ReactionMode(str, Enum):
    """Reaction sub-step update rule."""
    STRICT = "strict"        # explicit Euler, dt <= safety / max q
    SSPRK2 = "ssprk2"        # two-stage SSP Runge-Kutta, same step bound
    PATANKAR = "patankar"    # c <- (c + dt p) / (1 + dt q)


class FaceAverage(str, Enum):
    """Averaging of cell diffusivities onto faces."""
    ARITHMETIC = "arithmetic"
    HARMONIC = "harmonic"
