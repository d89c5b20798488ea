#!/usr/bin/env python3
"""Global-existence certificates evaluated in exact rational arithmetic.

Each check produces a list of named inequalities between rationals. A
system is certified for a dimension when every inequality holds; the
threshold tables for the three reaction systems and two diffusivity
regimes follow from those inequalities alone.
"""

import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .constants import (
    BOOTSTRAP_CAP,
    BOOTSTRAP_MAX_STEPS,
    BOOTSTRAP_TRAP_STEPS,
    CERTIFICATE_TRACE_CAP,
    DIM_SCAN_LIMIT,
    BootstrapOutcome,
    DiffusivityClass,
    ProblemKindName,
    Relation,
)
from .errors import DomainError
from .models import NetworkSpec

logger = logging.getLogger(__name__)

_LOG_FLOAT_MAX = math.log(sys.float_info.max)

Rational = Union[int, Fraction]
ONE = Fraction(1)
TWO = Fraction(2)


@dataclass(frozen=True)
class ProblemKind:
    """Reaction system whose existence conditions are checked."""
    name: ProblemKindName
    alpha: Fraction = ONE
    beta: Fraction = ONE
    gamma: Fraction = ONE

    def __post_init__(self):
        for label in ("alpha", "beta", "gamma"):
            value = Fraction(getattr(self, label))
            if value <= 0:
                raise DomainError(f"{label} must be positive, got {value}")
            object.__setattr__(self, label, value)
        if self.name is not ProblemKindName.GENERALIZED_ROTHE and not self.alpha == self.beta == self.gamma == 1:
            raise DomainError(f"{self.name.value} systems have unit exponents")

    @classmethod
    def rothe(cls) -> "ProblemKind":
        return cls(ProblemKindName.ROTHE)

    @classmethod
    def network(cls) -> "ProblemKind":
        return cls(ProblemKindName.NETWORK)

    @classmethod
    def generalized(cls, alpha: Rational, beta: Rational, gamma: Rational) -> "ProblemKind":
        return cls(ProblemKindName.GENERALIZED_ROTHE, Fraction(alpha), Fraction(beta), Fraction(gamma))

    @property
    def order(self) -> Fraction:
        """Total forward order alpha + beta."""
        return self.alpha + self.beta

    def recursion_coefficients(self, dim: int) -> tuple[Fraction, Fraction]:
        """(a, b) of the exponent recursion 1/r' = a/r - b + epsilon."""
        return self.gamma * self.order, Fraction(2) * (self.order + 1) / (dim + 2)


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: Fraction
    relation: Relation
    rhs: Fraction
    satisfied: bool

    @classmethod
    def check(cls, name: str, lhs: Rational, relation: Relation, rhs: Rational) -> "Condition":
        lhs, rhs = Fraction(lhs), Fraction(rhs)
        return cls(name, lhs, relation, rhs, relation.holds(lhs, rhs))


@dataclass(frozen=True)
class BootstrapTrace:
    epsilon: Fraction
    sequence: tuple[Fraction, ...]
    outcome: BootstrapOutcome

    @property
    def steps(self) -> int:
        return max(len(self.sequence) - 1, 0)


@dataclass(frozen=True)
class Certificate:
    certified: bool
    kind: ProblemKind
    diffusivity_class: DiffusivityClass
    dim: int
    r0: Fraction
    r0_is_supremum: bool
    conditions: tuple[Condition, ...]
    bootstrap: Optional[BootstrapTrace] = None
    max_certified_dim: Optional[int] = None
    notes: tuple[str, ...] = field(default_factory=tuple)


# Regularity gain -------------------------------------------------------------

def regularity_gain(r: Rational, dim: int) -> tuple[Union[Fraction, float], bool]:
    """Supremum of admissible q for an L^r source, and whether it is attained.

    An infinite supremum is never attained since q must stay finite.

    Raises:
        DomainError: r < 1 or dim < 1
    """
    r = Fraction(r)
    if r < 1:
        raise DomainError(f"source exponent must be at least 1, got {r}")
    if dim < 1:
        raise DomainError(f"dimension must be at least 1, got {dim}")
    if r == 1:
        if dim == 1:
            return TWO, False
        return Fraction(dim + 2, dim), False
    if dim >= 3:
        inverse = max(1 / r - Fraction(2, dim + 2), Fraction(0))
        attained = True
    else:
        inverse = max(1 / r - Fraction(1, 2), Fraction(0))
        attained = dim == 1
    if inverse == 0:
        return math.inf, False
    return 1 / inverse, attained


def interpolation_exponent(p: Rational, dim: int) -> tuple[Fraction, bool]:
    """Exponent q with V2 functions bounded in L^q(Q_T) given an L^p-in-space bound.

    q = 2 + 2p/N for N >= 3 and q = 2 + p for N = 1; in dimension two
    2 + p is a supremum that is not attained.
    """
    p = Fraction(p)
    if p < 1 or dim < 1:
        raise DomainError("interpolation needs p >= 1 and dim >= 1")
    if dim >= 3:
        return 2 + 2 * p / dim, True
    return 2 + p, dim == 1


# Conditions ------------------------------------------------------------------

def initial_exponent(cls: DiffusivityClass, dim: int) -> tuple[Fraction, bool]:
    """Starting integrability r0 and whether it is only a supremum."""
    if cls is DiffusivityClass.OWN:
        return TWO, False
    if dim == 1:
        return TWO, True
    return Fraction(dim + 2, dim), True


def _unit_conditions(kind: ProblemKind, dim: int, r0: Fraction) -> list[Condition]:
    # at a supremum the existence of a smaller admissible r0 is equivalent
    # to the strict inequality at the supremum itself
    n2 = Fraction(1, dim + 2)
    product = Condition.check("product_integrable", 2 / r0 - 4 * n2, Relation.LT, 1)
    if kind.name is ProblemKindName.ROTHE:
        return [product, Condition.check("estimate_improves", 1 / r0, Relation.LT, 6 * n2)]
    return [Condition.check("cascade_improves", 1 / r0, Relation.LT, 4 * n2), product]


def _generalized_own(kind: ProblemKind, dim: int) -> list[Condition]:
    conditions = [Condition.check("backward_power_bounded", kind.gamma, Relation.LE, 2)]
    if dim == 1:
        return conditions
    n4 = Fraction(4, dim + 2)
    order = kind.order
    r0 = TWO
    a, b = kind.recursion_coefficients(dim)
    conditions += [
        Condition.check("exponent_window", order * (kind.gamma - n4), Relation.LT, 1 + n4),
        Condition.check("forward_integrable", a / r0 - Fraction(2) * order / (dim + 2), Relation.LT, 1),
        Condition.check("estimate_improves", (a - 1) / r0, Relation.LT, b),
    ]
    return conditions


def _generalized_general(kind: ProblemKind, dim: int) -> list[Condition]:
    conditions = [Condition.check("backward_linear", kind.gamma, Relation.LE, 1)]
    if dim == 1:
        return conditions
    conditions += [
        Condition.check("backward_below_gain", kind.gamma, Relation.LT, Fraction(dim + 2, dim)),
        Condition.check("forward_growth", kind.order * (kind.gamma * dim - 2), Relation.LT, dim + 2),
    ]
    return conditions


def evaluate_conditions(kind: ProblemKind, cls: DiffusivityClass, dim: int) -> tuple[Fraction, bool, list[Condition]]:
    """Exact condition set for one dimension; returns (r0, r0_is_supremum, conditions)."""
    if dim < 1:
        raise DomainError(f"dimension must be at least 1, got {dim}")
    r0, open_bound = initial_exponent(cls, dim)
    if kind.name is ProblemKindName.GENERALIZED_ROTHE:
        if cls is DiffusivityClass.OWN:
            return r0, open_bound, _generalized_own(kind, dim)
        return r0, open_bound, _generalized_general(kind, dim)
    if dim == 1:
        return r0, open_bound, [Condition.check("dimension_one", dim, Relation.EQ, 1)]
    return r0, open_bound, _unit_conditions(kind, dim, r0)


def _certified(kind: ProblemKind, cls: DiffusivityClass, dim: int) -> bool:
    _, _, conditions = evaluate_conditions(kind, cls, dim)
    return all(c.satisfied for c in conditions)


def unbounded_in_dimension(kind: ProblemKind) -> bool:
    """True when the conditions hold in every dimension."""
    return kind.name is ProblemKindName.GENERALIZED_ROTHE and kind.gamma * kind.order <= 1


def max_certified_dim(kind: ProblemKind, cls: DiffusivityClass) -> Optional[int]:
    """Largest certified dimension; None if unbounded, 0 if not even N=1."""
    if unbounded_in_dimension(kind) and _certified(kind, cls, 1):
        return None
    best = 0
    for dim in range(1, DIM_SCAN_LIMIT + 1):
        if not _certified(kind, cls, dim):
            return best
        best = dim
    return None


def _demo_r0(kind: ProblemKind, cls: DiffusivityClass, dim: int) -> Fraction:
    r0, open_bound = initial_exponent(cls, dim)
    if not open_bound:
        return r0
    a, b = kind.recursion_coefficients(dim)
    candidate = (1 + r0) / 2
    for _ in range(64):
        if b - (a - 1) / candidate > 0:
            break
        candidate = (candidate + r0) / 2
    else:
        candidate = (1 + r0) / 2
    return candidate


def check_global_existence(kind: ProblemKind, cls: DiffusivityClass, dim: int) -> Certificate:
    """Evaluate the existence conditions for (kind, class, dim).

    Raises:
        DomainError: dim < 1 or invalid exponents
    """
    r0, open_bound, conditions = evaluate_conditions(kind, cls, dim)
    certified = all(c.satisfied for c in conditions)

    bootstrap = None
    notes = []
    if dim >= 2:
        bootstrap = bootstrap_sequence(_demo_r0(kind, cls, dim), dim, cap=CERTIFICATE_TRACE_CAP, kind=kind)
    if dim == 2:
        notes.append("the dimension-two regularity gain is a strict bound; "
                     "the bootstrap trace uses the dimension-three recursion")
    if open_bound and dim >= 2:
        notes.append("r0 is a supremum; conditions are strict at the supremum")

    certificate = Certificate(
        certified=certified,
        kind=kind,
        diffusivity_class=cls,
        dim=dim,
        r0=r0,
        r0_is_supremum=open_bound,
        conditions=tuple(conditions),
        bootstrap=bootstrap,
        max_certified_dim=max_certified_dim(kind, cls),
        notes=tuple(notes),
    )
    logger.debug(f"{kind.name.value}/{cls.value} N={dim}: certified={certified}")
    return certificate


# Bootstrap -------------------------------------------------------------------

def bootstrap_sequence(r0: Rational, dim: int, epsilon: Optional[Rational] = None,
                       cap: Rational = BOOTSTRAP_CAP, max_steps: int = BOOTSTRAP_MAX_STEPS,
                       kind: Optional[ProblemKind] = None) -> BootstrapTrace:
    """Exact integrability exponents r_n from the improvement recursion.

    With a = gamma(alpha+beta), b = 2(alpha+beta+1)/(N+2) (a = 2, b = 6/(N+2)
    for unit exponents): if a/r_n - b >= 0 then 1/r_{n+1} = a/r_n - b + eps,
    otherwise r_{n+1} = r_n + 1. The sequence ends after the first element
    above ``cap``. ``epsilon`` defaults to half the admissible gap.
    """
    kind = kind or ProblemKind.rothe()
    r0 = Fraction(r0)
    cap = Fraction(cap)
    a, b = kind.recursion_coefficients(dim)
    gap = b - (a - 1) / r0 if r0 != 0 else Fraction(0)
    epsilon = gap / 2 if epsilon is None else Fraction(epsilon)

    if r0 <= 1 or epsilon <= 0 or epsilon >= gap:
        return BootstrapTrace(epsilon, (r0,), BootstrapOutcome.INFEASIBLE)

    # a < 1 makes u -> a u - b + eps a contraction; its fixed point caps the sequence
    if a < 1 and epsilon > b:
        fixed = (epsilon - b) / (1 - a)
        if a * fixed - b >= 0 and r0 < 1 / fixed <= cap:
            logger.debug(f"Bootstrap from {r0} trapped below {1 / fixed}")
            max_steps = min(max_steps, BOOTSTRAP_TRAP_STEPS)

    sequence = [r0]
    r = r0
    for _ in range(max_steps):
        if r > cap:
            return BootstrapTrace(epsilon, tuple(sequence), BootstrapOutcome.DIVERGED)
        drive = a / r - b
        if drive < 0:
            nxt = r + 1
        else:
            inverse = drive + epsilon
            nxt = 1 / inverse
            if nxt <= r:
                return BootstrapTrace(epsilon, tuple(sequence), BootstrapOutcome.STALLED)
        sequence.append(nxt)
        r = nxt
    outcome = BootstrapOutcome.DIVERGED if r > cap else BootstrapOutcome.STALLED
    return BootstrapTrace(epsilon, tuple(sequence), outcome)


def sequence_lemma_check(C: float, b: float, theta: float, y0: float, n_max: int) -> tuple[bool, list[float]]:
    """Criterion for y_{n+1} <= C b^n y_n^(1+theta) to force y_n -> 0.

    Returns the predicate b > 1 and y0 <= C^(-1/theta) b^(-1/theta^2),
    and the extremal sequence with equality for ``n_max`` steps.
    """
    if C <= 0 or b <= 0 or theta <= 0:
        raise DomainError("C, b and theta must be positive")
    if y0 < 0:
        raise DomainError("y0 must be nonnegative")
    threshold = C ** (-1.0 / theta) * b ** (-1.0 / theta ** 2)
    predicate = b > 1 and y0 <= threshold
    trace = [float(y0)]
    y = float(y0)
    log_c, log_b = math.log(C), math.log(b)
    for n in range(n_max):
        # 0 and inf are fixed points; steps run in log space
        if 0.0 < y < math.inf:
            exponent = log_c + n * log_b + (1.0 + theta) * math.log(y)
            y = math.exp(exponent) if exponent < _LOG_FLOAT_MAX else math.inf
        trace.append(y)
    return predicate, trace


# Network classification ------------------------------------------------------

def classify_network(spec: NetworkSpec) -> tuple[ProblemKind, DiffusivityClass]:
    """Map a parsed network to the system whose conditions apply.

    Single-product networks with unit exponents behave like the three-species
    system; a single reaction with other exponents is the generalized system.

    Raises:
        DomainError: several reactions with non-unit exponents
    """
    cls = DiffusivityClass.from_kinds(law.kind for law in spec.diffusivities)
    reactions = spec.reactions
    if any(not r.unit_exponents for r in reactions):
        if len(reactions) != 1:
            raise DomainError("non-unit rate exponents are supported for a single reaction only")
        r = reactions[0]
        return ProblemKind.generalized(r.alpha, r.beta, r.gamma), cls
    products = {r.product for r in reactions}
    if len(products) == 1:
        return ProblemKind.rothe(), cls
    return ProblemKind.network(), cls
