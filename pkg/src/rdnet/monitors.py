#!/usr/bin/env python3
"""Discrete norms, residuals and level-set measures over simulation trajectories."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .config import RuntimeConfig
from .constants import HOLDER_TOLERANCE
from .errors import DimensionMismatch, DomainError, ExponentRelationViolated
from .models import NetworkSpec
from .schemas import LevelSetEntry, LqEntry, MuEntry, NormReport, SpeciesNorms, rational
from .solver import Grid, State, Trajectory
from .stoich import ConservationVector, MassActionKinetics
from .utils import to_fraction

logger = logging.getLogger(__name__)

Exponent = Union[int, float, Fraction]


class InequalitySides(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def time_weights(times: Sequence[float]) -> np.ndarray:
    """Left-endpoint quadrature weights t_{k+1} - t_k; the last sample gets 0."""
    times = np.asarray(times, dtype=float)
    return np.append(np.diff(times), 0.0)


def _require_samples(trajectory: Trajectory, count: int = 1) -> None:
    if len(trajectory) < count:
        raise DomainError(f"trajectory needs at least {count} samples, has {len(trajectory)}")


def _space_norm(values: np.ndarray, p: float, cell_volume: float) -> float:
    values = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(values.max())
    return float((values ** p).sum() * cell_volume) ** (1.0 / p)


def lq_spacetime(trajectory: Trajectory, species: int, q: Exponent) -> float:
    """(sum_k w_k sum_cells h^N |c|^q)^(1/q); q = inf gives the maximum over all samples."""
    if not q >= 1:
        raise DomainError(f"q must be at least 1, got {q}")
    _require_samples(trajectory)
    series = np.abs(trajectory.species_series(species)).reshape(len(trajectory), -1)
    if math.isinf(q):
        return float(series.max())
    q = float(q)
    per_time = (series ** q).sum(axis=1) * trajectory.grid.cell_volume
    return float(np.dot(time_weights(trajectory.times), per_time)) ** (1.0 / q)


def linf(trajectory: Trajectory, species: int) -> float:
    return lq_spacetime(trajectory, species, math.inf)


def conservation_residual(trajectory: Trajectory, e: Union[ConservationVector, Sequence]) -> np.ndarray:
    """<e, total(t)> - <e, total(0)> at every sample."""
    _require_samples(trajectory)
    weights = e.as_array() if isinstance(e, ConservationVector) else np.asarray(e, dtype=float)
    if weights.shape != (len(trajectory.species),):
        raise DimensionMismatch(f"conservation vector has {weights.size} entries for "
                                f"{len(trajectory.species)} species")
    totals = np.array([State(t, f).totals(trajectory.grid) for t, f in zip(trajectory.times, trajectory.fields)])
    mass = totals @ weights
    return mass - mass[0]


def equilibrium_residual(trajectory: Trajectory, spec: NetworkSpec) -> np.ndarray:
    """max_j ||r_j(c(t))||_inf at every sample."""
    if spec.n_reactions == 0:
        return np.zeros(len(trajectory))
    kinetics = MassActionKinetics(spec)
    return np.array([float(np.abs(kinetics.rates(f)).max()) for f in trajectory.fields])


def _inverse(p: Exponent) -> Fraction:
    if isinstance(p, float) and math.isinf(p):
        return Fraction(0)
    return 1 / to_fraction(p)


def holder_interpolation_check(values: np.ndarray, q: Exponent, r: Exponent, s: Exponent,
                               alpha: Exponent, cell_volume: Optional[float] = None) -> InequalitySides:
    """Both sides of ||u||_q <= ||u||_r^(1-alpha) ||u||_s^alpha.

    The exponents must satisfy 1/q = (1-alpha)/r + alpha/s exactly. The
    measure defaults to the uniform probability on the cells.

    Raises:
        ExponentRelationViolated: relation fails, alpha outside [0, 1] or an exponent below 1
    """
    values = np.asarray(values, dtype=float)
    a = to_fraction(alpha)
    if not 0 <= a <= 1:
        raise ExponentRelationViolated(f"alpha must lie in [0, 1], got {a}")
    inverses = [_inverse(p) for p in (q, r, s)]
    if any(inv > 1 or inv < 0 for inv in inverses):
        raise ExponentRelationViolated("exponents must be at least 1")
    inv_q, inv_r, inv_s = inverses
    if inv_q != (1 - a) * inv_r + a * inv_s:
        raise ExponentRelationViolated(f"1/q = {inv_q} but (1-alpha)/r + alpha/s = {(1 - a) * inv_r + a * inv_s}")
    volume = cell_volume if cell_volume is not None else 1.0 / values.size
    weight = float(a)
    lhs = _space_norm(values, float(q), volume)
    rhs = _space_norm(values, float(r), volume) ** (1.0 - weight) * _space_norm(values, float(s), volume) ** weight
    return InequalitySides(lhs, rhs, lhs <= rhs * (1.0 + HOLDER_TOLERANCE))


def _gradient_sq(values: np.ndarray, grid: Grid) -> float:
    """||grad c||^2_{L2} from forward differences on interior faces."""
    total = 0.0
    for axis, h in enumerate(grid.h):
        jumps = np.diff(values, axis=axis) / h
        total += float((jumps ** 2).sum()) * grid.cell_volume
    return total


def v2_norm(trajectory: Trajectory, species: int) -> float:
    """(sup_t ||c||^2 + int (||c||^2 + ||grad c||^2) dt)^(1/2)."""
    _require_samples(trajectory, 2)
    grid = trajectory.grid
    l2 = np.array([float((f[species] ** 2).sum()) * grid.cell_volume for f in trajectory.fields])
    grad = np.array([_gradient_sq(f[species], grid) for f in trajectory.fields])
    return math.sqrt(float(l2.max()) + float(np.dot(time_weights(trajectory.times), l2 + grad)))


def level_set_measure(trajectory: Trajectory, species: int, k: float,
                      pairs: Sequence[tuple[Exponent, Exponent]] = ()) -> LevelSetEntry:
    """lambda(A_k(t)) = h^N #{c > k} per sample and mu = sum_t w_t lambda^(r/q) per (r, q)."""
    if k < 0:
        raise DomainError(f"level must be nonnegative, got {k}")
    _require_samples(trajectory)
    series = trajectory.species_series(species).reshape(len(trajectory), -1)
    lam = (series > k).sum(axis=1) * trajectory.grid.cell_volume
    weights = time_weights(trajectory.times)
    mu = []
    for r, q in pairs:
        power = float(to_fraction(r) / to_fraction(q))
        mu.append(MuEntry(r=rational(to_fraction(r)), q=rational(to_fraction(q)),
                          value=float(np.dot(weights, lam ** power))))
    return LevelSetEntry(species=trajectory.species[species], k=float(k),
                         lambda_series=[float(v) for v in lam], mu=mu)


def gagliardo_nirenberg_sides(values: np.ndarray, grid: Grid, p: Exponent, q: Exponent,
                              alpha: Exponent) -> InequalitySides:
    """||u||_q against ||u||_p^(1-alpha) ||u||_{H1}^alpha, without the domain constant.

    ``holds`` compares the sides with constant 1 and is informational only.

    Raises:
        ExponentRelationViolated: exponents outside the admissible range for the grid dimension
    """
    a = to_fraction(alpha)
    if not 0 <= a <= 1:
        raise ExponentRelationViolated(f"alpha must lie in [0, 1], got {a}")
    inv_p, inv_q = _inverse(p), _inverse(q)
    dim = grid.dim
    if dim >= 3:
        admissible = inv_q == (1 - a) * inv_p + a * (Fraction(1, 2) - Fraction(1, dim))
    elif dim == 2:
        admissible = (1 - a) * inv_p < inv_q
    else:
        admissible = (1 - a) * inv_p == inv_q
    if not admissible:
        raise ExponentRelationViolated(f"(p, q, alpha) = ({p}, {q}, {a}) is not admissible in dimension {dim}")
    values = np.asarray(values, dtype=float)
    h1 = math.sqrt(_space_norm(values, 2.0, grid.cell_volume) ** 2 + _gradient_sq(values, grid))
    weight = float(a)
    lhs = _space_norm(values, float(q), grid.cell_volume)
    rhs = _space_norm(values, float(p), grid.cell_volume) ** (1.0 - weight) * h1 ** weight
    return InequalitySides(lhs, rhs, lhs <= rhs * (1.0 + HOLDER_TOLERANCE))


@dataclass
class MonitorSet:
    """Monitors requested for a run, evaluated once the trajectory is complete."""
    q_values: tuple[Exponent, ...] = (1, 2, math.inf)
    levels: tuple[float, ...] = ()
    pairs: tuple[tuple[Exponent, Exponent], ...] = ()
    conservation: Optional[Union[ConservationVector, Sequence[float]]] = None
    threads: int = field(default_factory=lambda: RuntimeConfig().threads)
    observed: int = 0

    def observe(self, state: State, step: int) -> None:
        self.observed += 1
        logger.debug(f"Step {step}: t={state.t:.6g}, min c={float(state.fields.min()):.3g}")

    def _species_norms(self, trajectory: Trajectory, species: int) -> SpeciesNorms:
        entries = [LqEntry(q=rational(q if isinstance(q, float) else to_fraction(q)),
                           value=lq_spacetime(trajectory, species, q)) for q in self.q_values]
        v2 = v2_norm(trajectory, species) if len(trajectory) >= 2 else None
        return SpeciesNorms(species=trajectory.species[species], lq_spacetime=entries,
                            linf=linf(trajectory, species), v2=v2)

    def build_report(self, trajectory: Trajectory, spec: NetworkSpec) -> NormReport:
        n_species = len(trajectory.species)
        with ThreadPoolExecutor(max_workers=max(1, self.threads)) as pool:
            norms = list(pool.map(lambda i: self._species_norms(trajectory, i), range(n_species)))
            level_sets = list(pool.map(
                lambda job: level_set_measure(trajectory, job[0], job[1], self.pairs),
                [(i, k) for i in range(n_species) for k in self.levels]))
        drift = None
        if self.conservation is not None:
            drift = [float(v) for v in conservation_residual(trajectory, self.conservation)]
        report = NormReport(
            times=list(trajectory.times),
            species=norms,
            conservation_drift=drift,
            equilibrium_residual=[float(v) for v in equilibrium_residual(trajectory, spec)],
            level_sets=level_sets,
        )
        logger.info(f"Built norm report over {len(trajectory)} samples and {n_species} species")
        return report
