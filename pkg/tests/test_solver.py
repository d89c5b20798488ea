"""Tests for grids, initial conditions and the finite-volume integrator."""

import csv
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rdnet.config import SolverConfig
from rdnet.constants import FaceAverage, ReactionMode, Scheme
from rdnet.errors import ConfigError, DimensionMismatch, DomainError, ValidationError
from rdnet.monitors import conservation_residual, equilibrium_residual
from rdnet.netparse import parse_network
from rdnet.solver import (
    Checkerboard,
    CosineBump,
    FromCsv,
    Grid,
    RandomUniform,
    ReactionDiffusionSolver,
    State,
    Trajectory,
    Uniform,
    advance_step,
    init_state,
    parse_initial_condition,
    rescale_network,
    run_simulation,
)
from rdnet.stoich import build_matrix, find_conservation_vector


def make_config(**kwargs) -> SolverConfig:
    settings = dict(scheme=Scheme.EXPLICIT, reaction_mode=ReactionMode.STRICT, face_average=FaceAverage.ARITHMETIC,
                    dt_max=1e-2, safety=0.9, cg_tol=1e-12, cg_max_iters=1000, output_every=10 ** 6,
                    filtration_mode=False, rescale=False)
    settings.update(kwargs)
    return SolverConfig(**settings)


class TestGrid:
    def test_geometry(self):
        grid = Grid((4, 2), (1.0, 2.0))
        assert grid.dim == 2
        assert grid.h == (0.25, 1.0)
        assert grid.cell_volume == 0.25
        assert grid.n_cells == 8
        assert grid.volume == 2.0
        x, y = grid.centers()
        np.testing.assert_allclose(x[:, 0], [0.125, 0.375, 0.625, 0.875])
        np.testing.assert_allclose(y[0], [0.5, 1.5])

    def test_too_many_axes(self):
        with pytest.raises(ValidationError):
            Grid((2, 2, 2, 2), (1.0,) * 4)

    def test_lengths_mismatch(self):
        with pytest.raises(DimensionMismatch):
            Grid((4, 4), (1.0,))

    def test_single_cell_axis(self):
        with pytest.raises(ValidationError):
            Grid((1,), (1.0,))

    def test_nonpositive_length(self):
        with pytest.raises(ValidationError):
            Grid.uniform(1, 8, 0.0)


class TestInitialConditions:
    def test_uniform_is_constant(self, rothe):
        state = init_state(rothe, Grid.uniform(2, 4), Uniform((1.0, 1.0, 1.0)))
        assert state.t == 0.0
        assert state.fields.shape == (3, 4, 4)
        np.testing.assert_array_equal(state.fields, 1.0)

    def test_uniform_wrong_length(self, rothe):
        with pytest.raises(DimensionMismatch):
            init_state(rothe, Grid.uniform(1, 4), Uniform((1.0, 1.0)))

    def test_checkerboard(self, rothe):
        state = init_state(rothe, Grid.uniform(1, 8), Checkerboard(0.0, 2.0))
        assert state.fields.min() == 0.0
        assert state.fields.max() == 2.0
        assert state.fields.mean() == pytest.approx(1.0)
        assert state.fields[0, 0] == 0.0

    def test_cosine_bump_averages(self, heat):
        grid = Grid.uniform(1, 16)
        state = init_state(heat, grid, CosineBump(0, 1.0, 1.0))
        # mean of cos over the whole interval vanishes
        assert state.fields.mean() == pytest.approx(1.0, abs=1e-14)
        assert state.fields[0, 0] == pytest.approx(1.0 + 16 / math.pi * math.sin(math.pi / 16))

    def test_negative_initial_data(self, heat):
        with pytest.raises(DomainError):
            init_state(heat, Grid.uniform(1, 8), CosineBump(0, 1.0, 0.0))

    def test_random_is_reproducible(self, rothe):
        grid = Grid.uniform(1, 8)
        a = init_state(rothe, grid, RandomUniform(0.0, 1.0, seed=4)).fields
        b = init_state(rothe, grid, RandomUniform(0.0, 1.0, seed=4)).fields
        np.testing.assert_array_equal(a, b)

    def test_from_csv(self, rothe, tmp_path):
        path = tmp_path / "ic.csv"
        path.write_text("A1,A2,A3\n1,2,3\n4,5,6\n", encoding="utf-8")
        state = init_state(rothe, Grid.uniform(1, 2), FromCsv(path))
        np.testing.assert_array_equal(state.fields, [[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]])

    def test_from_csv_wrong_shape(self, rothe, tmp_path):
        path = tmp_path / "ic.csv"
        path.write_text("1,2\n3,4\n", encoding="utf-8")
        with pytest.raises(DimensionMismatch):
            init_state(rothe, Grid.uniform(1, 2), FromCsv(path))

    def test_from_csv_missing(self, rothe, tmp_path):
        with pytest.raises(FileNotFoundError):
            init_state(rothe, Grid.uniform(1, 2), FromCsv(tmp_path / "absent.csv"))

    @pytest.mark.parametrize("text, expected", [
        ("uniform:1,1,1", Uniform((1.0, 1.0, 1.0))),
        ("cosine_bump:A2,0.5,1", CosineBump(1, 0.5, 1.0)),
        ("cosine_bump:3,0.5,1", CosineBump(2, 0.5, 1.0)),
        ("checkerboard:0,2", Checkerboard(0.0, 2.0)),
        ("random_uniform:0,1,7", RandomUniform(0.0, 1.0, 7)),
    ])
    def test_parse(self, text, expected):
        assert parse_initial_condition(text, ("A1", "A2", "A3")) == expected

    @pytest.mark.parametrize("text", ["gaussian:1", "checkerboard:0", "uniform:a,b"])
    def test_parse_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_initial_condition(text, ("A1", "A2", "A3"))


class TestStep:
    def test_equilibrium_unchanged(self, rothe):
        grid = Grid.uniform(2, 6)
        state = init_state(rothe, grid, Uniform((1.0, 1.0, 1.0)))
        new, dt = advance_step(rothe, grid, state, make_config())
        assert dt > 0
        assert new.t == pytest.approx(dt)
        np.testing.assert_allclose(new.fields, 1.0, rtol=0, atol=1e-15)

    def test_one_step_conserves_mass(self, rothe):
        grid = Grid.uniform(1, 16)
        state = init_state(rothe, grid, RandomUniform(0.0, 2.0, seed=1))
        solver = ReactionDiffusionSolver(rothe, grid, make_config())
        new, _ = solver.advance(state)
        assert solver.conserved_total(new) == pytest.approx(solver.conserved_total(state), rel=1e-13)

    def test_negative_state_rejected(self, rothe):
        grid = Grid.uniform(1, 4)
        fields = np.ones((3, 4))
        fields[0, 1] = -0.1
        with pytest.raises(DomainError):
            advance_step(rothe, grid, State(0.0, fields), make_config())

    def test_lands_on_end_time(self, heat):
        grid = Grid.uniform(1, 8)
        trajectory, _ = run_simulation(heat, grid, make_config(t_end=0.0123), CosineBump(0, 0.5, 1.0))
        assert trajectory.times[-1] == 0.0123

    def test_filtration_needs_own_diffusivities(self, mmh):
        with pytest.raises(ConfigError):
            ReactionDiffusionSolver(mmh, Grid.uniform(1, 4), make_config(filtration_mode=True))

    def test_invalid_config(self, rothe):
        with pytest.raises(ConfigError):
            ReactionDiffusionSolver(rothe, Grid.uniform(1, 4), make_config(safety=1.5))


class TestOracles:
    """Analytic and ODE references."""

    @staticmethod
    def _heat_error(heat, n: int) -> float:
        grid = Grid.uniform(1, n)
        trajectory, _ = run_simulation(heat, grid, make_config(t_end=0.1), CosineBump(0, 1.0, 1.0))
        edges = grid.edges(0)
        averages = 1.0 / (math.pi * grid.h[0]) * np.diff(np.sin(math.pi * edges))
        exact = 1.0 + math.exp(-math.pi ** 2 * 0.1) * averages
        error = trajectory.final.fields[0] - exact
        return math.sqrt(float((error ** 2).sum()) * grid.h[0])

    def test_heat_equation_second_order(self, heat):
        ratio = self._heat_error(heat, 32) / self._heat_error(heat, 64)
        assert 3.2 <= ratio <= 4.8

    def test_homogeneous_rothe_matches_ode(self, rothe):
        config = make_config(t_end=1.0, dt_max=2e-4, reaction_mode=ReactionMode.SSPRK2)
        trajectory, _ = run_simulation(rothe, Grid.uniform(1, 4), config, Uniform((2.0, 1.0, 0.0)))

        def rhs(_, c):
            r = c[0] * c[1] - c[2]
            return [-r, -r, r]

        reference = solve_ivp(rhs, (0.0, 1.0), [2.0, 1.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-12)
        final = trajectory.final.fields.reshape(3, -1)
        for i in range(3):
            np.testing.assert_allclose(final[i], reference.y[i, -1], atol=1e-6)

    def test_strict_conservation(self, rothe):
        grid = Grid.uniform(1, 64)
        trajectory, _ = run_simulation(rothe, grid, make_config(t_end=5.0, output_every=1000),
                                       Checkerboard(0.0, 2.0))
        drift = conservation_residual(trajectory, (1, 1, 2))
        initial = float(np.dot([1, 1, 2], State(0.0, trajectory.fields[0]).totals(grid)))
        assert np.abs(drift).max() <= 1e-10 * initial

    def test_equilibrium_attraction(self, rothe):
        config = make_config(t_end=50.0, dt_max=0.05, scheme=Scheme.SEMI_IMPLICIT, output_every=100)
        trajectory, _ = run_simulation(rothe, Grid.uniform(1, 64), config, CosineBump(0, 0.5, 1.0))
        assert equilibrium_residual(trajectory, rothe)[-1] <= 1e-4

    def test_filtration_matches_general_for_constant_diffusivity(self, rothe):
        grid = Grid.uniform(1, 16)
        ic = RandomUniform(0.5, 1.5, seed=9)
        general, _ = run_simulation(rothe, grid, make_config(t_end=0.2), ic)
        filtration, _ = run_simulation(rothe, grid, make_config(t_end=0.2, filtration_mode=True), ic)
        np.testing.assert_allclose(filtration.times, general.times, rtol=1e-12)
        np.testing.assert_allclose(filtration.final.fields, general.final.fields, rtol=0, atol=1e-12)

    @staticmethod
    def _euler_error(rothe, dt_max: float) -> float:
        config = make_config(t_end=1.0, dt_max=dt_max)
        trajectory, _ = run_simulation(rothe, Grid.uniform(1, 4), config, Uniform((2.0, 1.0, 0.0)))

        def rhs(_, c):
            r = c[0] * c[1] - c[2]
            return [-r, -r, r]

        reference = solve_ivp(rhs, (0.0, 1.0), [2.0, 1.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-12)
        final = trajectory.final.fields.reshape(3, -1)[:, 0]
        return float(np.abs(final - reference.y[:, -1]).max())

    def test_strict_mode_first_order_in_time(self, rothe):
        ratio = self._euler_error(rothe, 1e-2) / self._euler_error(rothe, 5e-3)
        assert 1.7 <= ratio <= 2.3

    @pytest.mark.parametrize("name", ["mmh", "polymer"])
    def test_network_conservation(self, request, name):
        spec = request.getfixturevalue(name)
        grid = Grid.uniform(2, 8)
        trajectory, _ = run_simulation(spec, grid, make_config(t_end=1.0, output_every=20),
                                       RandomUniform(0.0, 2.0, seed=3))
        e = find_conservation_vector(build_matrix(spec))
        drift = conservation_residual(trajectory, e)
        initial = float(np.dot(e.as_array(), State(0.0, trajectory.fields[0]).totals(grid)))
        assert len(drift) > 2
        assert np.abs(drift).max() <= 1e-10 * initial


class TestPositivity:
    @pytest.mark.parametrize("seed", range(20))
    def test_corpus_stays_nonnegative(self, seed, rothe, rothe_own, mmh, polymer):
        spec = (rothe, rothe_own, mmh, polymer)[seed % 4]
        grid = Grid.uniform(1, 12) if seed % 2 == 0 else Grid.uniform(2, 6)
        mode = ReactionMode.PATANKAR if seed % 3 == 0 else ReactionMode.STRICT
        trajectory, _ = run_simulation(spec, grid, make_config(t_end=0.1, reaction_mode=mode),
                                       RandomUniform(0.0, 3.0, seed=seed))
        assert all(d.min_concentration >= 0.0 for d in trajectory.diagnostics)
        assert min(f.min() for f in trajectory.fields) >= 0.0

    def test_semi_implicit_stays_nonnegative(self, rothe_own):
        config = make_config(t_end=0.5, scheme=Scheme.SEMI_IMPLICIT, face_average=FaceAverage.HARMONIC)
        trajectory, _ = run_simulation(rothe_own, Grid.uniform(2, 8), config, Checkerboard(0.0, 2.0))
        assert all(d.min_concentration >= 0.0 for d in trajectory.diagnostics)


class TestSublinearRates:
    """Exponents below one drain a species to zero in finite time."""

    FORWARD = "species A1 A2 A3; A1 + A2 -> A3 : kf=1, kb=0, alpha=0.5;"
    BACKWARD = "species A1 A2 A3; A1 + A2 <- A3 : kf=0, kb=1, gamma=0.5;"

    @pytest.mark.parametrize("mode", [ReactionMode.STRICT, ReactionMode.SSPRK2, ReactionMode.PATANKAR])
    def test_forward_runs_past_extinction(self, mode):
        # sqrt(c1) = tan(pi/4 - t/2) with c2 = 1 + c1, so A1 is gone at t = pi/2
        spec = parse_network(self.FORWARD)
        trajectory, _ = run_simulation(spec, Grid.uniform(1, 4), make_config(t_end=5.0, reaction_mode=mode),
                                       Uniform((1.0, 2.0, 0.0)))
        final = trajectory.final.fields
        assert trajectory.times[-1] == 5.0
        assert all(d.min_concentration >= 0.0 for d in trajectory.diagnostics)
        np.testing.assert_allclose(final[0], 0.0, atol=1e-12)
        np.testing.assert_allclose(final[1], 1.0, atol=1e-12)
        np.testing.assert_allclose(final[2], 1.0, atol=1e-12)

    def test_forward_tracks_exact_solution(self):
        spec = parse_network(self.FORWARD)
        config = make_config(t_end=0.5, dt_max=1e-3)
        trajectory, _ = run_simulation(spec, Grid.uniform(1, 4), config, Uniform((1.0, 2.0, 0.0)))
        exact = math.tan(math.pi / 4 - 0.25) ** 2
        np.testing.assert_allclose(trajectory.final.fields[0], exact, rtol=1e-2)

    def test_backward_runs_past_extinction(self):
        # sqrt(c3) = 1 - t/2
        spec = parse_network(self.BACKWARD)
        trajectory, _ = run_simulation(spec, Grid.uniform(1, 4), make_config(t_end=3.0),
                                       Uniform((0.0, 0.0, 1.0)))
        final = trajectory.final.fields
        assert trajectory.times[-1] == 3.0
        np.testing.assert_allclose(final[2], 0.0, atol=1e-12)
        np.testing.assert_allclose(final[:2], 1.0, atol=1e-12)

    @pytest.mark.parametrize("mode", [ReactionMode.STRICT, ReactionMode.PATANKAR])
    def test_mixed_exponents_heterogeneous(self, mode):
        spec = parse_network("species A1 A2 A3; A1 + A2 <-> A3 : kf=1, kb=2, alpha=0.5, beta=1, gamma=2;")
        grid = Grid.uniform(2, 6)
        trajectory, _ = run_simulation(spec, grid, make_config(t_end=0.5, reaction_mode=mode, output_every=10),
                                       Checkerboard(0.0, 2.0))
        assert all(d.min_concentration >= 0.0 for d in trajectory.diagnostics)
        drift = conservation_residual(trajectory, (1, 1, 2))
        initial = float(np.dot([1, 1, 2], State(0.0, trajectory.fields[0]).totals(grid)))
        assert np.abs(drift).max() <= 1e-10 * initial


class TestRescaling:
    def test_scales(self):
        spec = parse_network("species A1 A2 A3; A1 + A2 <-> A3 : kf=2, kb=0.5; diff A1 = 1 + c1 : dmin=1;")
        rescaled, conc_scale, time_scale = rescale_network(spec)
        assert (rescaled.reactions[0].kf, rescaled.reactions[0].kb) == (1, 1)
        assert conc_scale == 0.25
        assert time_scale == 2.0
        assert rescaled.diffusivities[0].lower_bound == 2

    def test_needs_single_reaction(self, polymer):
        with pytest.raises(ConfigError):
            rescale_network(polymer)

    def test_rescaled_run_matches_direct_run(self):
        spec = parse_network("species A1 A2 A3; A1 + A2 <-> A3 : kf=2, kb=0.5;")
        grid = Grid.uniform(1, 4)
        ic = Uniform((1.0, 0.5, 0.2))
        config = dict(t_end=1.0, dt_max=1e-3, reaction_mode=ReactionMode.SSPRK2)
        direct, _ = run_simulation(spec, grid, make_config(**config), ic)
        scaled, _ = run_simulation(spec, grid, make_config(rescale=True, **config), ic)
        assert scaled.times[-1] == 1.0
        np.testing.assert_allclose(scaled.final.fields, direct.final.fields, atol=1e-5)


class TestTrajectory:
    def test_times_strictly_increase(self):
        trajectory = Trajectory(Grid.uniform(1, 2), ("u",))
        trajectory.record(State(0.0, np.ones((1, 2))))
        with pytest.raises(ValidationError):
            trajectory.record(State(0.0, np.ones((1, 2))))

    def test_summary_csv(self, rothe, tmp_path):
        trajectory, _ = run_simulation(rothe, Grid.uniform(1, 4), make_config(t_end=0.05, output_every=2),
                                       Uniform((1.0, 1.0, 1.0)))
        path = tmp_path / "out.csv"
        trajectory.to_csv(path)
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "species", "mean", "min", "max", "total"]
        assert len(rows) == 1 + 3 * len(trajectory)
        assert float(rows[1][5]) == pytest.approx(1.0)

    def test_per_cell_csv(self, heat, tmp_path):
        trajectory = Trajectory(Grid.uniform(1, 3), ("u",))
        trajectory.record(State(0.0, np.array([[1.0, 2.0, 3.0]])))
        path = tmp_path / "cells.csv"
        trajectory.to_csv(path, per_cell=True)
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows == [["t", "species", "cell_0", "cell_1", "cell_2"], ["0.0", "u", "1.0", "2.0", "3.0"]]
