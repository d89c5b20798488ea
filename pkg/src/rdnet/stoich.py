#!/usr/bin/env python3
"""Stoichiometry of A_i + A_j <-> A_k networks."""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
import sympy

from .constants import (
    MAX_VERTEX_SPECIES,
    QUASI_POSITIVITY_FACE_MAX,
    QUASI_POSITIVITY_SAMPLES,
    QUASI_POSITIVITY_SEED,
    QUASI_POSITIVITY_TOL,
)
from .errors import DimensionMismatch, DomainError
from .models import NetworkSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StoichMatrix:
    """P x R integer matrix whose column j is the net change of reaction j."""
    entries: tuple[tuple[int, ...], ...]
    n_reactions: int = -1

    def __post_init__(self):
        widths = {len(row) for row in self.entries}
        if len(widths) > 1:
            raise DimensionMismatch("stoichiometric matrix rows differ in length")
        width = widths.pop() if widths else 0
        if self.n_reactions < 0:
            object.__setattr__(self, "n_reactions", width)
        elif self.entries and width != self.n_reactions:
            raise DimensionMismatch(f"rows have {width} entries, expected {self.n_reactions}")

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]], n_species: Optional[int] = None) -> "StoichMatrix":
        if n_species is None:
            if not columns:
                raise DimensionMismatch("species count is required for a matrix without columns")
            n_species = len(columns[0])
        if any(len(col) != n_species for col in columns):
            raise DimensionMismatch("columns differ in length")
        rows = tuple(tuple(int(col[i]) for col in columns) for i in range(n_species))
        return cls(rows, len(columns))

    @property
    def n_species(self) -> int:
        return len(self.entries)

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self.entries)

    def columns(self) -> list[tuple[int, ...]]:
        return [self.column(j) for j in range(self.n_reactions)]

    def to_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64).reshape(self.n_species, self.n_reactions)

    def check_structure(self) -> list[str]:
        """List violations of the canonical column structure (empty when canonical)."""
        problems = []
        for j, col in enumerate(self.columns()):
            positives = [v for v in col if v > 0]
            negatives = sorted(v for v in col if v < 0)
            if positives != [1]:
                problems.append(f"column {j} must have exactly one +1 entry")
            if negatives not in ([-2], [-1, -1]):
                problems.append(f"column {j} must consume one -2 or two -1 entries")
            if sum(col) != -1:
                problems.append(f"column {j} must sum to -1")
        return problems

    def to_json(self) -> list[list[int]]:
        return [list(row) for row in self.entries]


@dataclass(frozen=True)
class ConservationVector:
    """Strictly positive e with M^T e = 0, normalized so min(e) = 1."""
    values: tuple[Fraction, ...]
    null_space_dim: int

    def to_json(self) -> list[list[int]]:
        return [[v.numerator, v.denominator] for v in self.values]

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])


@dataclass(frozen=True)
class Infeasible:
    """No strictly positive conservation vector exists."""
    reason: str
    null_space_dim: int


@dataclass(frozen=True)
class SortResult:
    """Row and column permutations bringing M into block-triangular form.

    Sorted row k is original row ``row_perm[k]``; likewise for columns.
    """
    row_perm: tuple[int, ...]
    col_perm: tuple[int, ...]
    s: int
    block_bounds: tuple[int, ...]

    def apply(self, matrix: StoichMatrix) -> StoichMatrix:
        rows = tuple(tuple(matrix.entries[i][j] for j in self.col_perm) for i in self.row_perm)
        return StoichMatrix(rows, matrix.n_reactions)

    @property
    def is_identity(self) -> bool:
        return (self.row_perm == tuple(range(len(self.row_perm)))
                and self.col_perm == tuple(range(len(self.col_perm))))

    def is_sorted(self, matrix: StoichMatrix) -> bool:
        """True when every column's +1 row lies strictly below all its negative rows."""
        return is_block_triangular(self.apply(matrix))


@dataclass(frozen=True)
class NotSortable:
    """Extraction stalled: no remaining row is nonnegative with a +1."""
    reason: str
    remaining_rows: tuple[int, ...]
    remaining_cols: tuple[int, ...]


def is_block_triangular(matrix: StoichMatrix) -> bool:
    for col in matrix.columns():
        plus = [i for i, v in enumerate(col) if v > 0]
        minus = [i for i, v in enumerate(col) if v < 0]
        if len(plus) != 1 or any(i >= plus[0] for i in minus):
            return False
    return True


def build_matrix(spec: NetworkSpec) -> StoichMatrix:
    """Column j is e_{product} - e_{reactant_a} - e_{reactant_b}."""
    columns = []
    for reaction in spec.reactions:
        col = [0] * spec.n_species
        col[reaction.product] += 1
        col[reaction.reactant_a] -= 1
        col[reaction.reactant_b] -= 1
        columns.append(col)
    return StoichMatrix.from_columns(columns, spec.n_species)


# Conservation vector ---------------------------------------------------------

class _RationalSimplex:
    """Dense two-phase tableau simplex over Fractions using Bland's rule.

    Solves min c.x subject to A x = b, x >= 0.
    """

    def __init__(self, A: list[list[Fraction]], b: list[Fraction], n: int):
        self.m = len(A)
        self.n = n
        self.rows: list[list[Fraction]] = []
        self.rhs: list[Fraction] = []
        for i, (row, value) in enumerate(zip(A, b)):
            sign = -1 if value < 0 else 1
            artificial = [Fraction(int(k == i)) for k in range(self.m)]
            self.rows.append([sign * v for v in row] + artificial)
            self.rhs.append(sign * value)
        self.basis = [self.n + i for i in range(self.m)]

    def _pivot(self, i: int, j: int) -> None:
        pivot = self.rows[i][j]
        self.rows[i] = [v / pivot for v in self.rows[i]]
        self.rhs[i] /= pivot
        for k in range(len(self.rows)):
            if k != i and self.rows[k][j] != 0:
                factor = self.rows[k][j]
                self.rows[k] = [a - factor * p for a, p in zip(self.rows[k], self.rows[i])]
                self.rhs[k] -= factor * self.rhs[i]
        self.basis[i] = j

    def _minimize(self, cost: list[Fraction], allowed: range) -> None:
        while True:
            basic_cost = [cost[v] for v in self.basis]
            entering = None
            for j in allowed:
                if j in self.basis:
                    continue
                reduced = cost[j] - sum(cb * row[j] for cb, row in zip(basic_cost, self.rows))
                if reduced < 0:
                    entering = j
                    break
            if entering is None:
                return
            candidates = [(self.rhs[i] / row[entering], self.basis[i], i)
                          for i, row in enumerate(self.rows) if row[entering] > 0]
            if not candidates:
                raise ArithmeticError("unbounded linear program")
            _, _, leave = min(candidates)
            self._pivot(leave, entering)

    def phase_one(self) -> bool:
        """Find a basic feasible point; False when none exists."""
        width = self.n + self.m
        cost = [Fraction(0)] * self.n + [Fraction(1)] * self.m
        self._minimize(cost, range(width))
        if any(self.rhs[i] != 0 for i, v in enumerate(self.basis) if v >= self.n):
            return False
        # drive zero-valued artificials out of the basis; drop redundant rows
        i = 0
        while i < len(self.rows):
            if self.basis[i] >= self.n:
                j = next((j for j in range(self.n) if self.rows[i][j] != 0), None)
                if j is None:
                    del self.rows[i], self.rhs[i], self.basis[i]
                    continue
                self._pivot(i, j)
            i += 1
        return True

    def phase_two(self, cost: list[Fraction]) -> list[Fraction]:
        self._minimize(cost + [Fraction(0)] * self.m, range(self.n))
        x = [Fraction(0)] * self.n
        for i, v in enumerate(self.basis):
            x[v] = self.rhs[i]
        return x


def null_space_dimension(matrix: StoichMatrix) -> int:
    """dim ker M^T = P - rank M."""
    if matrix.n_reactions == 0:
        return matrix.n_species
    return matrix.n_species - sympy.Matrix(matrix.entries).rank()


def find_conservation_vector(matrix: StoichMatrix) -> Union[ConservationVector, Infeasible]:
    """Exact rational feasibility of {M^T e = 0, e >= 1}.

    Writes e = 1 + y with y >= 0, runs phase one on M^T y = -M^T 1, then
    minimizes sum(e) so the reported point is a vertex of the feasible set.
    """
    P, R = matrix.n_species, matrix.n_reactions
    dim = null_space_dimension(matrix)
    A = [[Fraction(matrix.entries[i][j]) for i in range(P)] for j in range(R)]
    b = [-sum(row) for row in A]

    simplex = _RationalSimplex(A, b, P)
    if not simplex.phase_one():
        logger.debug(f"No positive conservation vector (null space dimension {dim})")
        return Infeasible("no strictly positive vector is orthogonal to every reaction", dim)
    y = simplex.phase_two([Fraction(1)] * P)
    e = [1 + v for v in y]
    smallest = min(e)
    return ConservationVector(tuple(v / smallest for v in e), dim)


# Block-triangular sorting ----------------------------------------------------

def sort_block_triangular(matrix: StoichMatrix) -> Union[SortResult, NotSortable]:
    """Permute rows and columns so every product row lies below its reactant rows.

    Repeatedly extracts the lowest-index remaining row that is nonnegative on
    the remaining columns and carries a +1, moving it with its columns to the
    bottom right, until every column is placed.
    """
    rows = list(range(matrix.n_species))
    cols = list(range(matrix.n_reactions))
    extracted: list[tuple[int, list[int]]] = []
    M = matrix.entries

    while cols:
        chosen = None
        for r in rows:
            values = [M[r][c] for c in cols]
            if min(values) >= 0 and 1 in values:
                chosen = r
                break
        if chosen is None:
            return NotSortable("no remaining species is produced without being consumed",
                               tuple(rows), tuple(cols))
        block = [c for c in cols if M[chosen][c] > 0]
        extracted.append((chosen, block))
        rows.remove(chosen)
        cols = [c for c in cols if c not in block]

    row_perm = rows + [r for r, _ in reversed(extracted)]
    col_perm: list[int] = []
    bounds = [0]
    for _, block in reversed(extracted):
        col_perm.extend(block)
        bounds.append(len(col_perm))
    return SortResult(tuple(row_perm), tuple(col_perm), len(rows), tuple(bounds))


# Rates -----------------------------------------------------------------------

class MassActionKinetics:
    """Compiled rate tables of a network for repeated evaluation.

    Concentrations are arrays of shape (P, ...); rates come back with
    shape (R, ...).
    """

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.matrix = build_matrix(spec)
        self.n_species = spec.n_species
        self.n_reactions = spec.n_reactions
        reactions = spec.reactions
        self.a = np.array([r.reactant_a for r in reactions], dtype=int)
        self.b = np.array([r.reactant_b for r in reactions], dtype=int)
        self.p = np.array([r.product for r in reactions], dtype=int)
        self.kf = np.array([float(r.kf) for r in reactions])
        self.kb = np.array([float(r.kb) for r in reactions])
        self.alpha = np.array([float(r.alpha) for r in reactions])
        self.beta = np.array([float(r.beta) for r in reactions])
        self.gamma = np.array([float(r.gamma) for r in reactions])
        self.unit_exponents = all(r.unit_exponents for r in reactions)
        self._columns = self.matrix.to_array().astype(float)

    def _check(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if c.shape[0] != self.n_species:
            raise DimensionMismatch(f"expected {self.n_species} concentrations, got {c.shape[0]}")
        if np.any(c < 0):
            raise DomainError("concentrations must be nonnegative")
        return c

    def _terms(self, c: np.ndarray, j: int) -> tuple[np.ndarray, np.ndarray]:
        forward = self.kf[j] * c[self.a[j]] ** self.alpha[j] * c[self.b[j]] ** self.beta[j]
        backward = self.kb[j] * c[self.p[j]] ** self.gamma[j]
        return forward, backward

    def rates(self, c: np.ndarray) -> np.ndarray:
        c = self._check(c)
        r = np.zeros((self.n_reactions,) + c.shape[1:])
        for j in range(self.n_reactions):
            forward, backward = self._terms(c, j)
            r[j] = forward - backward
        return r

    def production(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Reaction rates r and production terms f = M r summed in reaction order."""
        r = self.rates(c)
        f = np.zeros((self.n_species,) + r.shape[1:])
        for j in range(self.n_reactions):
            for i in np.flatnonzero(self._columns[:, j]):
                f[i] = f[i] + self._columns[i, j] * r[j]
        return r, f

    def decomposition(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Split f_i = p_i - q_i c_i.

        Consumption whose own-concentration exponent is below one cannot be
        written as q c and is subtracted from p instead.
        """
        c = self._check(c)
        p = np.zeros_like(c)
        q = np.zeros_like(c)
        for j in range(self.n_reactions):
            a, b, prod = self.a[j], self.b[j], self.p[j]
            forward, backward = self._terms(c, j)
            p[prod] += forward
            p[a] += backward
            p[b] += backward
            if a == b:
                self._consume(p, q, c, a, 2.0 * self.kf[j], c[a], 0.0, self.alpha[j] + self.beta[j], forward, 2.0)
            else:
                self._consume(p, q, c, a, self.kf[j], c[b], self.beta[j], self.alpha[j], forward, 1.0)
                self._consume(p, q, c, b, self.kf[j], c[a], self.alpha[j], self.beta[j], forward, 1.0)
            self._consume(p, q, c, prod, self.kb[j], c[prod], 0.0, self.gamma[j], backward, 1.0)
        return p, q

    @staticmethod
    def _consume(p, q, c, i, k, partner, partner_exp, own_exp, term, multiplicity) -> None:
        if own_exp >= 1.0:
            q[i] += k * partner ** partner_exp * c[i] ** (own_exp - 1.0)
        else:
            p[i] -= multiplicity * term

    def max_consumption(self, c_max: np.ndarray) -> float:
        """Upper bound of q over states bounded by ``c_max`` (unit exponents only)."""
        _, q = self.decomposition(np.asarray(c_max, dtype=float))
        return float(q.max()) if q.size else 0.0

    def limited_production(self, c: np.ndarray, dt: float) -> np.ndarray:
        """Production over a step of length ``dt`` with each reaction direction
        scaled down so no species is consumed beyond what it holds.

        A direction is scaled by the smallest availability ratio among the
        species it consumes, so c + dt f stays nonnegative and every column
        keeps its conservation weight.

        Args:
            c: Nonnegative concentrations of shape (P, ...).
            dt: Step length.

        Returns:
            Production terms with the shape of ``c``.
        """
        c = self._check(c)
        forward = np.zeros((self.n_reactions,) + c.shape[1:])
        backward = np.zeros_like(forward)
        for j in range(self.n_reactions):
            forward[j], backward[j] = self._terms(c, j)
        lost = np.maximum(-self._columns, 0.0)
        gained = np.maximum(self._columns, 0.0)
        consumption = np.tensordot(lost, forward, axes=1) + np.tensordot(gained, backward, axes=1)
        demand = dt * consumption
        short = demand > c
        ratio = np.ones_like(c)
        ratio[short] = c[short] / demand[short]
        f = np.zeros_like(c)
        for j in range(self.n_reactions):
            column = self._columns[:, j]
            consumed_fwd = np.flatnonzero(column < 0)
            consumed_bwd = np.flatnonzero(column > 0)
            scale_fwd = ratio[consumed_fwd].min(axis=0) if consumed_fwd.size else 1.0
            scale_bwd = ratio[consumed_bwd].min(axis=0) if consumed_bwd.size else 1.0
            net = scale_fwd * forward[j] - scale_bwd * backward[j]
            for i in np.flatnonzero(column):
                f[i] = f[i] + column[i] * net
        return f


def production_rates(spec: NetworkSpec, c: Sequence) -> tuple[Sequence, Sequence]:
    """Rates r_j = kf c_a^alpha c_b^beta - kb c_p^gamma and production f = M r.

    Fraction inputs with integer exponents are evaluated exactly.

    Raises:
        DomainError: a concentration is negative
    """
    if len(c) != spec.n_species:
        raise DimensionMismatch(f"expected {spec.n_species} concentrations, got {len(c)}")
    if any(isinstance(v, Fraction) for v in c):
        return _exact_production(spec, [Fraction(v) for v in c])
    r, f = MassActionKinetics(spec).production(np.asarray(c, dtype=float))
    return r, f


def _exact_power(base: Fraction, exponent: Fraction) -> Fraction:
    if exponent.denominator != 1:
        raise DomainError("exact evaluation needs integer rate exponents")
    return base ** exponent.numerator


def _exact_production(spec: NetworkSpec, c: list[Fraction]) -> tuple[list[Fraction], list[Fraction]]:
    if any(v < 0 for v in c):
        raise DomainError("concentrations must be nonnegative")
    r = []
    for reaction in spec.reactions:
        forward = (reaction.kf * _exact_power(c[reaction.reactant_a], reaction.alpha)
                   * _exact_power(c[reaction.reactant_b], reaction.beta))
        r.append(forward - reaction.kb * _exact_power(c[reaction.product], reaction.gamma))
    matrix = build_matrix(spec)
    f = [sum((matrix.entries[i][j] * r[j] for j in range(len(r))), Fraction(0)) for i in range(spec.n_species)]
    return r, f


def rate_decomposition(spec: NetworkSpec, c: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Production p and consumption coefficient q with f_i = p_i - q_i c_i.

    Raises:
        DomainError: a concentration is negative
    """
    return MassActionKinetics(spec).decomposition(np.asarray(c, dtype=float))


# Quasi-positivity ------------------------------------------------------------

@dataclass(frozen=True)
class SpeciesPositivity:
    species: str
    min_face_value: float
    points: int
    structural_cases: tuple[str, ...]
    passed: bool


@dataclass(frozen=True)
class QuasiPositivityReport:
    species: tuple[SpeciesPositivity, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.species)


def _structural_cases(spec: NetworkSpec, i: int) -> tuple[str, ...]:
    cases = []
    for j, reaction in enumerate(spec.reactions):
        if i in (reaction.reactant_a, reaction.reactant_b):
            cases.append(f"reaction {j + 1}: reactant, forward consumption vanishes at c_i=0, "
                         f"backward term {reaction.kb} c^gamma >= 0 feeds it")
        elif i == reaction.product:
            cases.append(f"reaction {j + 1}: product, backward consumption vanishes at c_i=0, "
                         f"forward term {reaction.kf} c^alpha c^beta >= 0 feeds it")
    return tuple(cases)


def check_quasi_positivity(spec: NetworkSpec, samples: int = QUASI_POSITIVITY_SAMPLES,
                           seed: int = QUASI_POSITIVITY_SEED) -> QuasiPositivityReport:
    """Sample f_i on the face {c >= 0, c_i = 0} plus its {0,1} vertices."""
    if samples < 1:
        raise DomainError("samples must be at least 1")
    kinetics = MassActionKinetics(spec)
    rng = np.random.default_rng(seed)
    P = spec.n_species
    vertices = None
    if P <= MAX_VERTEX_SPECIES:
        vertices = np.array(list(itertools.product((0.0, 1.0), repeat=P))).T
    entries = []
    for i, name in enumerate(spec.species):
        points = rng.uniform(0.0, QUASI_POSITIVITY_FACE_MAX, size=(P, samples))
        if vertices is not None:
            points = np.concatenate([points, vertices], axis=1)
        points[i] = 0.0
        _, f = kinetics.production(points)
        lowest = float(f[i].min())
        entries.append(SpeciesPositivity(
            species=name,
            min_face_value=lowest,
            points=points.shape[1],
            structural_cases=_structural_cases(spec, i),
            passed=lowest >= -QUASI_POSITIVITY_TOL,
        ))
    report = QuasiPositivityReport(tuple(entries))
    logger.debug(f"Quasi-positivity {'passed' if report.passed else 'FAILED'} for {P} species")
    return report


# Growth bounds ---------------------------------------------------------------

@dataclass(frozen=True)
class GrowthBound:
    species: str
    position: int
    value: float
    bound: float
    holds: bool


def growth_bound_check(spec: NetworkSpec, sort: SortResult, c: Sequence[float]) -> list[GrowthBound]:
    """Evaluate f_k <= C(sum c) for never-produced rows and
    f_k <= C(sum c + sum_{i<k} c_i^2) below them, in sorted order.
    """
    c = np.asarray(c, dtype=float)
    _, f = MassActionKinetics(spec).production(c)
    constant = max(1.0, sum(float(r.kf + r.kb) for r in spec.reactions))
    total = float(c.sum())
    results = []
    squares = 0.0
    for k, i in enumerate(sort.row_perm):
        bound = constant * total if k < sort.s else constant * (total + squares)
        value = float(f[i])
        results.append(GrowthBound(spec.species[i], k, value, bound, value <= bound * (1 + 1e-12) + 1e-12))
        squares += float(c[i]) ** 2
    return results
