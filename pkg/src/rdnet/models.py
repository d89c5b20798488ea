#!/usr/bin/env python3
"""Data models for reaction networks."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .constants import DEFAULT_C_BOX, DEFAULT_DIFFUSIVITY, DEFAULT_T_BOX, DEFAULT_X_BOX
from .constants import DiffusivityKind, Direction
from .errors import ValidationError
from .expressions import Expr, Num
from .utils import to_fraction

ONE = Fraction(1)


def _interval(bounds) -> tuple[Fraction, Fraction]:
    return (to_fraction(bounds[0]), to_fraction(bounds[1]))


@dataclass(frozen=True)
class SamplingBox:
    """Admissible box on which diffusivity lower bounds are sampled."""
    c: tuple[Fraction, Fraction] = field(default_factory=lambda: _interval(DEFAULT_C_BOX))
    t: tuple[Fraction, Fraction] = field(default_factory=lambda: _interval(DEFAULT_T_BOX))
    x: tuple[Fraction, Fraction] = field(default_factory=lambda: _interval(DEFAULT_X_BOX))

    def __post_init__(self):
        for name in ("c", "t", "x"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValidationError(f"box {name}=[{lo}, {hi}] is empty")
        if self.c[0] < 0:
            raise ValidationError("concentration box must be nonnegative")

    @property
    def is_default(self) -> bool:
        return self == SamplingBox()


@dataclass(frozen=True)
class ReactionSpec:
    """A_{reactant_a} + A_{reactant_b} <-> A_{product} with power-law rates."""
    reactant_a: int
    reactant_b: int
    product: int
    kf: Fraction
    kb: Fraction
    alpha: Fraction = ONE
    beta: Fraction = ONE
    gamma: Fraction = ONE
    direction: Direction = Direction.REVERSIBLE

    def __post_init__(self):
        if self.kf < 0 or self.kb < 0:
            raise ValidationError(f"rate constants must be nonnegative (kf={self.kf}, kb={self.kb})")
        if self.product in (self.reactant_a, self.reactant_b):
            raise ValidationError("product must differ from both reactants")
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise ValidationError("rate exponents must be positive")
        if self.direction is Direction.FORWARD and self.kb != 0:
            raise ValidationError("'->' reactions must have kb=0")
        if self.direction is Direction.BACKWARD and self.kf != 0:
            raise ValidationError("'<-' reactions must have kf=0")

    @property
    def is_dimerization(self) -> bool:
        return self.reactant_a == self.reactant_b

    @property
    def unit_exponents(self) -> bool:
        return self.alpha == self.beta == self.gamma == 1

    @property
    def exponents(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class DiffusivityLaw:
    """Fickian diffusivity d_i with a certified positive lower bound."""
    kind: DiffusivityKind
    expression: Expr
    lower_bound: Fraction

    def __post_init__(self):
        if self.lower_bound <= 0:
            raise ValidationError(f"diffusivity lower bound must be positive, got {self.lower_bound}")

    @classmethod
    def default(cls) -> "DiffusivityLaw":
        return cls(DiffusivityKind.CONSTANT, Num(DEFAULT_DIFFUSIVITY), DEFAULT_DIFFUSIVITY)

    @property
    def is_default(self) -> bool:
        return self == DiffusivityLaw.default()


@dataclass(frozen=True)
class NetworkSpec:
    """Validated reaction network with per-species diffusivities."""
    species: tuple[str, ...]
    reactions: tuple[ReactionSpec, ...] = ()
    diffusivities: tuple[DiffusivityLaw, ...] = ()
    dim_hint: Optional[int] = None
    box: SamplingBox = field(default_factory=SamplingBox)

    def __post_init__(self):
        if not self.species:
            raise ValidationError("a network needs at least one species")
        if len(set(self.species)) != len(self.species):
            raise ValidationError("species names must be unique")
        if not self.diffusivities:
            object.__setattr__(self, "diffusivities", tuple(DiffusivityLaw.default() for _ in self.species))
        if len(self.diffusivities) != len(self.species):
            raise ValidationError(
                f"{len(self.diffusivities)} diffusivities given for {len(self.species)} species")
        for j, reaction in enumerate(self.reactions):
            for index in (reaction.reactant_a, reaction.reactant_b, reaction.product):
                if not 0 <= index < len(self.species):
                    raise ValidationError(f"reaction {j + 1} references unknown species index {index}")
        if self.dim_hint is not None and self.dim_hint < 1:
            raise ValidationError(f"dimension must be at least 1, got {self.dim_hint}")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    def index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ValidationError(f"unknown species '{name}'") from None

    @property
    def unit_rates(self) -> bool:
        return all(r.kf == 1 and r.kb == 1 for r in self.reactions)
