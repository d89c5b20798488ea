#!/usr/bin/env python3
"""Finite-volume integrator for reaction-diffusion systems with Neumann boundaries."""

import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from .config import SolverConfig
from .constants import MAX_STEP_HALVINGS, REACTION_MASS_FLOOR, DiffusivityKind, FaceAverage, ReactionMode, Scheme
from .errors import ConfigError, DimensionMismatch, DomainError, LinearSolveFailure, NonFiniteState, ValidationError
from .expressions import Antiderivative, Div, Mul, Num, Var, eval_expression, exact_value, substitute
from .models import DiffusivityLaw, NetworkSpec
from .stoich import ConservationVector, MassActionKinetics, build_matrix, find_conservation_vector

logger = logging.getLogger(__name__)

_AXES = ("x1", "x2", "x3")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred box grid [0, L_1] x ... x [0, L_N]."""
    cells: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        lengths = tuple(float(length) for length in self.lengths)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)
        if not 1 <= len(cells) <= 3:
            raise ValidationError(f"grid dimension must be 1, 2 or 3, got {len(cells)}")
        if len(lengths) != len(cells):
            raise DimensionMismatch(f"{len(cells)} cell counts but {len(lengths)} lengths")
        if any(n < 2 for n in cells):
            raise ValidationError(f"every axis needs at least 2 cells, got {cells}")
        if any(not length > 0 for length in lengths):
            raise ValidationError(f"lengths must be positive, got {lengths}")

    @classmethod
    def uniform(cls, dim: int, n: int, length: float = 1.0) -> "Grid":
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(length / n for length, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.h)

    @property
    def n_cells(self) -> int:
        return math.prod(self.cells)

    @property
    def volume(self) -> float:
        return math.prod(self.lengths)

    def edges(self, axis: int) -> np.ndarray:
        return np.linspace(0.0, self.lengths[axis], self.cells[axis] + 1)

    def centers(self) -> tuple[np.ndarray, ...]:
        axes = [(edges[:-1] + edges[1:]) / 2.0 for edges in map(self.edges, range(self.dim))]
        return tuple(np.meshgrid(*axes, indexing="ij"))


@dataclass
class State:
    """Cell averages of every species at time t; ``fields`` has shape (P, *grid.shape)."""
    t: float
    fields: np.ndarray

    def totals(self, grid: Grid) -> np.ndarray:
        """Integral of each species over the domain."""
        return self.fields.reshape(self.fields.shape[0], -1).sum(axis=1) * grid.cell_volume

    def copy(self) -> "State":
        return State(self.t, self.fields.copy())


# Initial conditions ----------------------------------------------------------

class InitialCondition(ABC):
    """Descriptor producing cell averages of the initial concentrations."""

    @abstractmethod
    def values(self, grid: Grid, n_species: int) -> np.ndarray:
        """Array of shape (n_species, *grid.shape)."""


@dataclass(frozen=True)
class Uniform(InitialCondition):
    levels: tuple[float, ...]

    def values(self, grid: Grid, n_species: int) -> np.ndarray:
        if len(self.levels) != n_species:
            raise DimensionMismatch(f"uniform IC has {len(self.levels)} values for {n_species} species")
        return np.array(self.levels, dtype=float).reshape((n_species,) + (1,) * grid.dim) * np.ones(grid.shape)


@dataclass(frozen=True)
class CosineBump(InitialCondition):
    """background + amplitude * prod_d cos(pi x_d / L_d) on one species, background elsewhere."""
    species: int
    amplitude: float
    background: float

    def values(self, grid: Grid, n_species: int) -> np.ndarray:
        if not 0 <= self.species < n_species:
            raise DimensionMismatch(f"species index {self.species} out of range")
        profile = np.ones(grid.shape)
        for axis in range(grid.dim):
            length, h = grid.lengths[axis], grid.h[axis]
            edges = grid.edges(axis)
            # exact cell average of cos(pi x / L)
            averages = length / (math.pi * h) * np.diff(np.sin(math.pi * edges / length))
            shape = [1] * grid.dim
            shape[axis] = grid.cells[axis]
            profile = profile * averages.reshape(shape)
        out = np.full((n_species,) + grid.shape, float(self.background))
        out[self.species] = self.background + self.amplitude * profile
        return out


@dataclass(frozen=True)
class Checkerboard(InitialCondition):
    """``lo`` on cells with even index sum, ``hi`` on odd ones, for every species."""
    lo: float
    hi: float

    def values(self, grid: Grid, n_species: int) -> np.ndarray:
        parity = np.indices(grid.shape).sum(axis=0) % 2
        board = np.where(parity == 0, float(self.lo), float(self.hi))
        return np.broadcast_to(board, (n_species,) + grid.shape).copy()


@dataclass(frozen=True)
class RandomUniform(InitialCondition):
    lo: float
    hi: float
    seed: int = 0

    def values(self, grid: Grid, n_species: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.lo, self.hi, size=(n_species,) + grid.shape)


@dataclass(frozen=True)
class FromCsv(InitialCondition):
    """One row per cell in lexicographic order, one column per species."""
    path: Union[str, Path]

    def values(self, grid: Grid, n_species: int) -> np.ndarray:
        path = Path(self.path)
        if not path.is_file():
            raise FileNotFoundError(f"initial condition file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            first = f.readline()
        skip = 1 if any(ch.isalpha() and ch not in "eE" for ch in first) else 0
        table = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
        if table.shape != (grid.n_cells, n_species):
            raise DimensionMismatch(
                f"{path} has shape {table.shape}, expected ({grid.n_cells}, {n_species})")
        return table.T.reshape((n_species,) + grid.shape).copy()


def parse_initial_condition(text: str, species: Sequence[str] = ()) -> InitialCondition:
    """Build a descriptor from 'name:arg,arg,...'.

    Forms: uniform:v1,...,vP | cosine_bump:SPECIES,amplitude,background |
    checkerboard:lo,hi | random_uniform:lo,hi[,seed] | csv:PATH
    """
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    args = [a.strip() for a in rest.split(",")] if rest.strip() else []
    try:
        if name == "uniform":
            return Uniform(tuple(float(a) for a in args))
        if name == "cosine_bump":
            target, amplitude, background = args
            index = species.index(target) if target in species else int(target) - 1
            return CosineBump(index, float(amplitude), float(background))
        if name == "checkerboard":
            lo, hi = args
            return Checkerboard(float(lo), float(hi))
        if name == "random_uniform":
            seed = int(args[2]) if len(args) > 2 else 0
            return RandomUniform(float(args[0]), float(args[1]), seed)
        if name in ("csv", "from_csv"):
            return FromCsv(rest.strip())
    except (ValueError, IndexError) as e:
        raise ConfigError(f"malformed initial condition '{text}': {e}") from None
    raise ConfigError(f"unknown initial condition '{name}'")


def init_state(spec: NetworkSpec, grid: Grid, ic: InitialCondition) -> State:
    """Cell averages of the initial data at t = 0.

    Raises:
        DomainError: negative or non-finite initial values
        FileNotFoundError: missing CSV file
    """
    values = np.asarray(ic.values(grid, spec.n_species), dtype=float)
    if values.shape != (spec.n_species,) + grid.shape:
        raise DimensionMismatch(f"initial condition has shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DomainError("initial condition is not finite")
    if values.min() < 0:
        raise DomainError(f"initial condition is negative (min {values.min():.3g})")
    return State(0.0, values)


# Rescaling -------------------------------------------------------------------

def rescale_network(spec: NetworkSpec) -> tuple[NetworkSpec, float, float]:
    """Rewrite a single reversible unit-exponent reaction with kf = kb = 1.

    Returns (rescaled spec, concentration scale a = kb/kf, time scale 1/kb):
    c = a * c_hat and t = t_hat / kb.
    """
    if spec.n_reactions != 1:
        raise ConfigError("rescaling needs exactly one reaction")
    reaction = spec.reactions[0]
    if not reaction.unit_exponents or reaction.kf <= 0 or reaction.kb <= 0:
        raise ConfigError("rescaling needs positive kf, kb and unit exponents")
    scale = reaction.kb / reaction.kf
    rate = reaction.kb
    mapping = {"t": Div(Var("t"), Num(rate))}
    for i in range(spec.n_species):
        mapping[f"c{i + 1}"] = Mul(Num(scale), Var(f"c{i + 1}"))
    laws = []
    for law in spec.diffusivities:
        expression = Div(substitute(law.expression, mapping), Num(rate))
        laws.append(DiffusivityLaw(law.kind, expression, law.lower_bound / rate))
    unit = replace(reaction, kf=Fraction(1), kb=Fraction(1))
    rescaled = replace(spec, reactions=(unit,), diffusivities=tuple(laws))
    return rescaled, float(scale), float(1 / rate)


# Trajectory ------------------------------------------------------------------

@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    dt: float
    min_concentration: float
    conserved_total: float


@dataclass
class Trajectory:
    """Sampled states of a run plus per-step diagnostics."""
    grid: Grid
    species: tuple[str, ...]
    times: list[float] = field(default_factory=list)
    fields: list[np.ndarray] = field(default_factory=list)
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    def record(self, state: State) -> None:
        if self.times and state.t <= self.times[-1]:
            raise ValidationError("trajectory times must be strictly increasing")
        self.times.append(float(state.t))
        self.fields.append(state.fields.copy())

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> State:
        return State(self.times[-1], self.fields[-1])

    def species_series(self, species: int) -> np.ndarray:
        """Array of shape (samples, *grid.shape) for one species."""
        return np.stack([f[species] for f in self.fields])

    def to_csv(self, path: Union[str, Path], per_cell: bool = False) -> None:
        """Write summary statistics (mean/min/max/total) or per-cell values."""
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            if per_cell:
                writer.writerow(["t", "species"] + [f"cell_{k}" for k in range(self.grid.n_cells)])
            else:
                writer.writerow(["t", "species", "mean", "min", "max", "total"])
            for t, values in zip(self.times, self.fields):
                for name, field_values in zip(self.species, values):
                    flat = field_values.ravel()
                    if per_cell:
                        writer.writerow([repr(t), name] + [repr(float(v)) for v in flat])
                    else:
                        writer.writerow([repr(t), name, repr(float(flat.mean())), repr(float(flat.min())),
                                         repr(float(flat.max())), repr(float(flat.sum() * self.grid.cell_volume))])


# Solver ----------------------------------------------------------------------

class ReactionDiffusionSolver:
    """Lie-split finite-volume stepping: diffusion, then reaction.

    Diffusion uses two-point fluxes on interior faces and zero flux on the
    boundary. The compiled rate tables, diffusivity evaluators and sparse
    assembly indices are built once per network and grid.
    """

    def __init__(self, spec: NetworkSpec, grid: Grid, config: SolverConfig):
        self.spec = spec
        self.grid = grid
        self.config = config.validate()
        self.kinetics = MassActionKinetics(spec)
        self.n_species = spec.n_species

        conservation = find_conservation_vector(build_matrix(spec)) if spec.n_reactions else None
        if isinstance(conservation, ConservationVector):
            self.weights = conservation.as_array()
        elif spec.n_reactions == 0:
            self.weights = np.ones(self.n_species)
        else:
            self.weights = None

        centers = grid.centers()
        self._env: dict[str, Any] = {name: 0.0 for name in _AXES}
        self._env.update(zip(_AXES, centers))

        self._constant: list[Optional[float]] = []
        for law in spec.diffusivities:
            value = exact_value(law.expression) if law.kind is DiffusivityKind.CONSTANT else None
            self._constant.append(float(value) if value is not None else None)

        self._antiderivatives: list[Optional[Antiderivative]] = [None] * self.n_species
        if self.config.filtration_mode:
            for i, law in enumerate(spec.diffusivities):
                if law.kind is DiffusivityKind.GENERAL:
                    raise ConfigError(f"filtration mode needs diffusivities of own concentration "
                                      f"({spec.species[i]} is general)")
                self._antiderivatives[i] = Antiderivative(law.expression, f"c{i + 1}")

        self._faces = self._face_indices() if self.config.scheme is Scheme.SEMI_IMPLICIT else None

    # diffusivities -------------------------------------------------------------

    def cell_diffusivity(self, i: int, t: float, c: np.ndarray) -> np.ndarray:
        """d_i evaluated at every cell centre."""
        if self._constant[i] is not None:
            return np.full(self.grid.shape, self._constant[i])
        env = dict(self._env)
        env["t"] = t
        for k in range(self.n_species):
            env[f"c{k + 1}"] = c[k]
        values = eval_expression(self.spec.diffusivities[i].expression, env)
        return np.broadcast_to(values, self.grid.shape)

    def _sides(self, array: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
        left = [slice(None)] * array.ndim
        right = [slice(None)] * array.ndim
        left[axis] = slice(None, -1)
        right[axis] = slice(1, None)
        return array[tuple(left)], array[tuple(right)]

    def face_data(self, i: int, t: float, c: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Per-axis face coefficients and fluxes (already divided by h) of species i."""
        ci = c[i]
        coefficients, fluxes = [], []
        antiderivative = self._antiderivatives[i]
        if antiderivative is not None:
            potential = antiderivative(ci)
            for axis, h in enumerate(self.grid.h):
                c_left, c_right = self._sides(ci, axis)
                d_left, d_right = self._sides(potential, axis)
                jump = c_right - c_left
                drop = d_right - d_left
                flat = jump == 0.0
                slope = np.where(flat, antiderivative.derivative(c_left), drop / np.where(flat, 1.0, jump))
                coefficients.append(np.asarray(slope, dtype=float))
                fluxes.append(drop / h)
            return coefficients, fluxes

        d = self.cell_diffusivity(i, t, c)
        for axis, h in enumerate(self.grid.h):
            d_left, d_right = self._sides(d, axis)
            if self.config.face_average is FaceAverage.HARMONIC:
                face = 2.0 * d_left * d_right / (d_left + d_right)
            else:
                face = 0.5 * (d_left + d_right)
            c_left, c_right = self._sides(ci, axis)
            coefficients.append(face)
            fluxes.append(face * (c_right - c_left) / h)
        return coefficients, fluxes

    # time step -----------------------------------------------------------------

    def reaction_dt(self, c: np.ndarray) -> float:
        """Reaction step bound: exact positivity limit for unit exponents, floored c/|f| otherwise."""
        kinetics = self.kinetics
        if kinetics.n_reactions == 0:
            return math.inf
        if kinetics.unit_exponents:
            if self.config.reaction_mode is ReactionMode.PATANKAR:
                return math.inf
            # q is nondecreasing in c, so its maximum sits at the per-species maxima
            q_max = kinetics.max_consumption(c.reshape(self.n_species, -1).max(axis=1))
            return 1.0 / q_max if q_max > 0 else math.inf
        _, f = kinetics.production(c)
        draining = f < 0
        if not np.any(draining):
            return math.inf
        # limited_production in _react covers species below this mass
        floor = REACTION_MASS_FLOOR * float(c.max())
        return float((np.maximum(c[draining], floor) / -f[draining]).min())

    def select_dt(self, state: State, coefficients: list[list[np.ndarray]]) -> tuple[float, bool]:
        """Step size and whether it was cut to land exactly on t_end."""
        config = self.config
        limits = [config.dt_max, self.reaction_dt(state.fields)]
        if config.scheme is Scheme.EXPLICIT:
            d_max = max((float(a.max()) for per_species in coefficients for a in per_species), default=0.0)
            if d_max > 0:
                limits.append(min(self.grid.h) ** 2 / (2 * self.grid.dim * d_max))
        dt = config.safety * min(limits)
        remaining = config.t_end - state.t
        if dt >= remaining:
            return remaining, True
        if dt < 1e-15 * max(config.t_end, 1.0):
            raise DomainError(f"time step underflow at t={state.t:.6g}")
        return dt, False

    # sub-steps -----------------------------------------------------------------

    def _divergence(self, fluxes: list[np.ndarray]) -> np.ndarray:
        total = np.zeros(self.grid.shape)
        for axis, (flux, h) in enumerate(zip(fluxes, self.grid.h)):
            padding = [(0, 0)] * self.grid.dim
            padding[axis] = (1, 1)
            total += np.diff(np.pad(flux, padding), axis=axis) / h
        return total

    def _face_indices(self) -> list[tuple[np.ndarray, np.ndarray]]:
        index = np.arange(self.grid.n_cells).reshape(self.grid.shape)
        return [tuple(part.ravel() for part in self._sides(index, axis)) for axis in range(self.grid.dim)]

    def _implicit_diffusion(self, ci: np.ndarray, coefficients: list[np.ndarray], dt: float) -> np.ndarray:
        n = self.grid.n_cells
        rows, cols, vals = [], [], []
        for (left, right), face, h in zip(self._faces, coefficients, self.grid.h):
            w = dt * face.ravel() / h ** 2
            rows += [left, right, left, right]
            cols += [left, right, right, left]
            vals += [w, w, -w, -w]
        stiffness = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
        system = (sparse.identity(n, format="csr") + stiffness.tocsr()).tocsr()
        rhs = ci.ravel()
        solution, info = cg(system, rhs, x0=rhs.copy(), rtol=self.config.cg_tol, atol=0.0,
                            maxiter=self.config.cg_max_iters)
        if info != 0:
            raise LinearSolveFailure(f"conjugate gradient did not converge in {self.config.cg_max_iters} iterations")
        scale = max(float(np.abs(rhs).max()), 1.0)
        # round-off of the iterative solve below zero
        solution[(solution < 0) & (solution > -self.config.cg_tol * scale)] = 0.0
        return solution.reshape(self.grid.shape)

    def _react(self, c: np.ndarray, dt: float) -> np.ndarray:
        kinetics = self.kinetics
        if kinetics.n_reactions == 0:
            return c
        mode = self.config.reaction_mode
        if mode is ReactionMode.PATANKAR and kinetics.unit_exponents:
            p, q = kinetics.decomposition(c)
            return (c + dt * p) / (1.0 + dt * q)
        if not kinetics.unit_exponents:
            stage = np.maximum(c + dt * kinetics.limited_production(c, dt), 0.0)
            if mode is ReactionMode.SSPRK2:
                second = np.maximum(stage + dt * kinetics.limited_production(stage, dt), 0.0)
                return 0.5 * c + 0.5 * second
            return stage
        _, f = kinetics.production(c)
        stage = c + dt * f
        if mode is ReactionMode.SSPRK2:
            if stage.min() < 0:
                return stage
            _, f_stage = kinetics.production(stage)
            return 0.5 * c + 0.5 * (stage + dt * f_stage)
        return stage

    def _trial(self, state: State, coefficients, fluxes, dt: float) -> np.ndarray:
        c = state.fields
        diffused = np.empty_like(c)
        for i in range(self.n_species):
            if self.config.scheme is Scheme.SEMI_IMPLICIT:
                diffused[i] = self._implicit_diffusion(c[i], coefficients[i], dt)
            else:
                diffused[i] = c[i] + dt * self._divergence(fluxes[i])
        if diffused.min() < 0:
            return diffused
        return self._react(diffused, dt)

    def advance(self, state: State) -> tuple[State, float]:
        """One Lie step; halves dt while the result would turn negative.

        Raises:
            NonFiniteState: NaN or infinity in the new state
            LinearSolveFailure: semi-implicit solve did not converge
            DomainError: still negative after the allowed halvings
        """
        data = [self.face_data(i, state.t, state.fields) for i in range(self.n_species)]
        coefficients = [d[0] for d in data]
        fluxes = [d[1] for d in data]
        dt, lands = self.select_dt(state, coefficients)
        for _ in range(MAX_STEP_HALVINGS + 1):
            new = self._trial(state, coefficients, fluxes, dt)
            if not np.all(np.isfinite(new)):
                raise NonFiniteState(f"non-finite concentration at t={state.t:.6g}")
            if new.min() >= 0:
                t_new = self.config.t_end if lands else state.t + dt
                return State(t_new, new), dt
            dt /= 2.0
            lands = False
            logger.debug(f"Negative concentration at t={state.t:.6g}, halving step to {dt:.3g}")
        raise DomainError(f"step at t={state.t:.6g} stays negative after {MAX_STEP_HALVINGS} halvings")

    def conserved_total(self, state: State) -> float:
        totals = state.totals(self.grid)
        if self.weights is None:
            return float(totals.sum())
        return float(np.dot(self.weights, totals))

    def run(self, initial: State, monitors=None) -> Trajectory:
        """Integrate to t_end, sampling every ``output_every`` steps and at the end."""
        config = self.config
        trajectory = Trajectory(self.grid, self.spec.species)
        trajectory.record(initial)
        if monitors is not None:
            monitors.observe(initial, 0)
        state = initial
        step = 0
        while state.t < config.t_end:
            state, dt = self.advance(state)
            step += 1
            trajectory.diagnostics.append(StepDiagnostics(
                t=state.t, dt=dt, min_concentration=float(state.fields.min()),
                conserved_total=self.conserved_total(state)))
            if step % config.output_every == 0 or state.t >= config.t_end:
                trajectory.record(state)
                if monitors is not None:
                    monitors.observe(state, step)
        logger.info(f"Reached t={state.t:.6g} in {step} steps")
        return trajectory


def advance_step(spec: NetworkSpec, grid: Grid, state: State, config: SolverConfig) -> tuple[State, float]:
    """Single step from ``state``; see ReactionDiffusionSolver.advance."""
    if state.fields.min() < 0:
        raise DomainError("state must be nonnegative")
    return ReactionDiffusionSolver(spec, grid, config).advance(state)


def _unscale(trajectory: Trajectory, conc_scale: float, time_scale: float) -> Trajectory:
    out = Trajectory(trajectory.grid, trajectory.species)
    out.times = [t * time_scale for t in trajectory.times]
    out.fields = [f * conc_scale for f in trajectory.fields]
    out.diagnostics = [StepDiagnostics(d.t * time_scale, d.dt * time_scale, d.min_concentration * conc_scale,
                                       d.conserved_total * conc_scale) for d in trajectory.diagnostics]
    return out


def run_simulation(spec: NetworkSpec, grid: Grid, config: SolverConfig, ic: InitialCondition,
                   monitors=None):
    """Integrate from the initial condition; returns (Trajectory, NormReport or None)."""
    config.validate()
    initial = init_state(spec, grid, ic)
    if config.rescale:
        scaled_spec, conc_scale, time_scale = rescale_network(spec)
        scaled_config = replace(config, t_end=config.t_end / time_scale,
                                dt_max=config.dt_max / time_scale, rescale=False)
        logger.info(f"Rescaled to unit rates (concentration x{conc_scale:.6g}, time x{time_scale:.6g})")
        solver = ReactionDiffusionSolver(scaled_spec, grid, scaled_config)
        scaled = solver.run(State(0.0, initial.fields / conc_scale), monitors)
        trajectory = _unscale(scaled, conc_scale, time_scale)
        trajectory.times[-1] = config.t_end
    else:
        trajectory = ReactionDiffusionSolver(spec, grid, config).run(initial, monitors)
    report = monitors.build_report(trajectory, spec) if monitors is not None else None
    return trajectory, report
