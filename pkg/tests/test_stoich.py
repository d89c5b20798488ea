"""Tests for stoichiometry, conservation vectors, sorting and rate assembly."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdnet.errors import DimensionMismatch, DomainError, ValidationError
from rdnet.models import NetworkSpec, ReactionSpec
from rdnet.netparse import parse_network
from rdnet.stoich import (
    ConservationVector,
    Infeasible,
    MassActionKinetics,
    NotSortable,
    SortResult,
    StoichMatrix,
    build_matrix,
    check_quasi_positivity,
    find_conservation_vector,
    growth_bound_check,
    null_space_dimension,
    production_rates,
    rate_decomposition,
    sort_block_triangular,
)


class TestMatrix:
    def test_polymer_columns(self, polymer):
        matrix = build_matrix(polymer)
        assert matrix.columns() == [(-2, 1, 0, 0), (-1, -1, 1, 0), (-1, 0, -1, 1)]
        assert matrix.check_structure() == []

    def test_mmh_columns(self, mmh):
        assert build_matrix(mmh).columns() == [(-1, -1, 1, 0), (-1, 0, 1, -1)]

    def test_no_reactions(self):
        matrix = build_matrix(parse_network("species A B;"))
        assert matrix.n_species == 2
        assert matrix.n_reactions == 0
        assert matrix.to_array().shape == (2, 0)

    def test_structure_problems(self):
        matrix = StoichMatrix.from_columns([(0, -1)])
        assert matrix.check_structure()

    def test_ragged_columns(self):
        with pytest.raises(DimensionMismatch):
            StoichMatrix.from_columns([(1, -1), (1, -1, 0)])

    def test_random_networks_have_canonical_columns(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            spec = _random_unit_network(rng, int(rng.integers(3, 13)), int(rng.integers(1, 21)))
            matrix = build_matrix(spec)
            assert matrix.check_structure() == []
            for reaction, col in zip(spec.reactions, matrix.columns()):
                assert col[reaction.product] == 1
                assert col[reaction.reactant_a] < 0 and col[reaction.reactant_b] < 0
                assert sum(col) == -1


class TestConservationVector:
    """Exact feasibility of M^T e = 0 with e > 0."""

    def test_rothe(self, rothe):
        result = find_conservation_vector(build_matrix(rothe))
        assert isinstance(result, ConservationVector)
        assert result.values == (1, 1, 2)
        assert all(isinstance(v, Fraction) for v in result.values)
        assert result.null_space_dim == 2

    def test_polymer(self, polymer):
        result = find_conservation_vector(build_matrix(polymer))
        assert result.values == (1, 2, 3, 4)
        assert result.to_json() == [[1, 1], [2, 1], [3, 1], [4, 1]]

    def test_mmh(self, mmh):
        result = find_conservation_vector(build_matrix(mmh))
        assert result.values == (1, 1, 2, 1)

    def test_self_catalysis_pattern_infeasible(self):
        result = find_conservation_vector(StoichMatrix.from_columns([(0, -1)]))
        assert isinstance(result, Infeasible)
        assert result.null_space_dim == 1

    def test_no_reactions(self):
        result = find_conservation_vector(build_matrix(parse_network("species A B;")))
        assert result.values == (1, 1)

    def test_redundant_rows(self):
        # the same reaction twice gives a rank-deficient constraint system
        matrix = StoichMatrix.from_columns([(-1, -1, 1), (-1, -1, 1)])
        assert find_conservation_vector(matrix).values == (1, 1, 2)

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=8))
    @settings(max_examples=100, deadline=None)
    def test_result_is_orthogonal_and_positive(self, pairs):
        # species 0..5 combine into a fresh product each time: always conservative
        columns = []
        n_species = 6 + len(pairs)
        for k, (a, b) in enumerate(pairs):
            col = [0] * n_species
            col[a] -= 1
            col[b] -= 1
            col[6 + k] += 1
            columns.append(col)
        matrix = StoichMatrix.from_columns(columns, n_species)
        result = find_conservation_vector(matrix)
        assert isinstance(result, ConservationVector)
        assert min(result.values) == 1
        for col in matrix.columns():
            assert sum(e * m for e, m in zip(result.values, col)) == 0

    def test_null_space_dimension(self, polymer):
        assert null_space_dimension(build_matrix(polymer)) == 1


def _random_triples(rng: np.random.Generator, n_species: int, n_reactions: int):
    """(product, a, b) with the product at a higher index than both reactants."""
    for _ in range(n_reactions):
        product = int(rng.integers(1, n_species))
        a, b = (int(v) for v in rng.integers(0, product, size=2))
        yield product, a, b


def _random_conservative_columns(rng: np.random.Generator, n_species: int, n_reactions: int):
    columns = []
    for product, a, b in _random_triples(rng, n_species, n_reactions):
        col = [0] * n_species
        col[a] -= 1
        col[b] -= 1
        col[product] += 1
        columns.append(col)
    return columns


def _random_unit_network(rng: np.random.Generator, n_species: int, n_reactions: int) -> NetworkSpec:
    reactions = tuple(ReactionSpec(a, b, product, Fraction(1), Fraction(1))
                      for product, a, b in _random_triples(rng, n_species, n_reactions))
    return NetworkSpec(tuple(f"A{i + 1}" for i in range(n_species)), reactions)


class TestSorting:
    """Row/column permutations into block-triangular form."""

    def test_polymer_is_already_sorted(self, polymer):
        result = sort_block_triangular(build_matrix(polymer))
        assert isinstance(result, SortResult)
        assert result.is_identity

    def test_rothe_listed_product_first(self):
        spec = parse_network("species A3 A1 A2; A1 + A2 <-> A3 : kf=1, kb=1;")
        result = sort_block_triangular(build_matrix(spec))
        assert result.row_perm == (1, 2, 0)
        assert result.s == 2

    def test_mmh(self, mmh):
        result = sort_block_triangular(build_matrix(mmh))
        assert [mmh.species[i] for i in result.row_perm] == ["A1", "A2", "A4", "A3"]
        assert result.s == 3
        assert result.is_sorted(build_matrix(mmh))

    def test_cycle_not_sortable(self):
        # A1 + A1 -> A2 and A2 + A2 -> A1 feed each other
        matrix = StoichMatrix.from_columns([(-2, 1), (1, -2)])
        result = sort_block_triangular(matrix)
        assert isinstance(result, NotSortable)
        assert result.remaining_cols == (0, 1)

    def test_random_conservative_networks(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            n_species = int(rng.integers(3, 13))
            n_reactions = int(rng.integers(1, 21))
            matrix = StoichMatrix.from_columns(_random_conservative_columns(rng, n_species, n_reactions), n_species)
            order = rng.permutation(n_species)
            shuffled = StoichMatrix(tuple(matrix.entries[i] for i in order), n_reactions)
            result = sort_block_triangular(shuffled)
            assert isinstance(result, SortResult)
            assert result.is_sorted(shuffled)
            assert sorted(result.row_perm) == list(range(n_species))
            assert sorted(result.col_perm) == list(range(n_reactions))


class TestRates:
    """Mass-action rates, production terms and their split."""

    def test_equilibrium(self, rothe):
        r, f = production_rates(rothe, [1.0, 1.0, 1.0])
        np.testing.assert_allclose(r, [0.0])
        np.testing.assert_allclose(f, [0.0, 0.0, 0.0])

    def test_hand_values(self, rothe):
        r, f = production_rates(rothe, [2.0, 3.0, 0.0])
        np.testing.assert_allclose(r, [6.0])
        np.testing.assert_allclose(f, [-6.0, -6.0, 6.0])

    def test_reactant_face(self, rothe):
        _, f = production_rates(rothe, [0.0, 5.0, 2.0])
        assert f[0] == pytest.approx(2.0)

    def test_exact_rationals(self, polymer):
        c = [Fraction(1, 2), Fraction(1, 3), Fraction(2), Fraction(5, 7)]
        r, f = production_rates(polymer, c)
        assert all(isinstance(v, Fraction) for v in f)
        assert sum(e * v for e, v in zip((1, 2, 3, 4), f)) == 0

    def test_negative_concentration(self, rothe):
        with pytest.raises(DomainError):
            production_rates(rothe, [-1.0, 1.0, 1.0])

    def test_wrong_length(self, rothe):
        with pytest.raises(DimensionMismatch):
            production_rates(rothe, [1.0, 1.0])

    def test_decomposition_hand_values(self, rothe):
        p, q = rate_decomposition(rothe, [2.0, 3.0, 4.0])
        assert (p[0], q[0]) == pytest.approx((4.0, 3.0))
        assert (p[2], q[2]) == pytest.approx((6.0, 1.0))

    def test_decomposition_at_zero(self, rothe):
        p, q = rate_decomposition(rothe, [0.0, 0.0, 0.0])
        np.testing.assert_allclose(p - q * 0.0, 0.0)

    @given(st.lists(st.floats(0.0, 10.0), min_size=4, max_size=4))
    @settings(max_examples=100, deadline=None)
    def test_decomposition_reassembles_f(self, c):
        spec = parse_network("species A1 A2 A3 A4;"
                             "2 A1 <-> A2 : kf=1.5, kb=0.5;"
                             "A1 + A2 <-> A3 : kf=1, kb=2, alpha=0.5, beta=1, gamma=2;"
                             "A1 + A3 <-> A4 : kf=1, kb=1;")
        kinetics = MassActionKinetics(spec)
        c = np.array(c)
        p, q = kinetics.decomposition(c)
        _, f = kinetics.production(c)
        assert np.all(q >= 0)
        np.testing.assert_allclose(p - q * c, f, atol=1e-9, rtol=1e-9)

    def test_conserved_combination_vanishes(self, polymer):
        rng = np.random.default_rng(5)
        c = rng.uniform(0.0, 3.0, size=(4, 50))
        _, f = MassActionKinetics(polymer).production(c)
        np.testing.assert_allclose(np.tensordot([1, 2, 3, 4], f, axes=1), 0.0, atol=1e-12)

    @pytest.mark.parametrize("name", ["polymer", "mmh"])
    def test_conserved_combination_on_random_states(self, request, name):
        spec = request.getfixturevalue(name)
        e = find_conservation_vector(build_matrix(spec)).as_array()
        c = np.random.default_rng(8).uniform(0.0, 5.0, size=(spec.n_species, 1000))
        _, f = MassActionKinetics(spec).production(c)
        assert np.all(np.abs(np.tensordot(e, f, axes=1)) <= 1e-12 * np.abs(f).sum(axis=0))

    def test_limited_production_matches_for_short_steps(self):
        kinetics = MassActionKinetics(parse_network(
            "species A1 A2 A3; A1 + A2 <-> A3 : kf=1, kb=2, alpha=0.5, beta=1, gamma=2;"))
        c = np.random.default_rng(4).uniform(1.0, 2.0, size=(3, 20))
        _, f = kinetics.production(c)
        np.testing.assert_allclose(kinetics.limited_production(c, 1e-6), f, rtol=1e-14, atol=0)

    def test_limited_production_never_overdraws(self):
        spec = parse_network("species A1 A2 A3 A4;"
                             "2 A1 <-> A2 : kf=1.5, kb=0.5, alpha=0.5, beta=0.5;"
                             "A1 + A2 <-> A3 : kf=1, kb=2, alpha=0.5, beta=1, gamma=0.25;"
                             "A1 + A3 <-> A4 : kf=3, kb=1, gamma=0.5;")
        kinetics = MassActionKinetics(spec)
        e = find_conservation_vector(build_matrix(spec)).as_array()
        c = np.random.default_rng(6).uniform(0.0, 1.0, size=(4, 500))
        c[:, ::7] = 0.0
        for dt in (0.1, 10.0, 1e4):
            f = kinetics.limited_production(c, dt)
            assert (c + dt * f).min() >= -1e-10
            assert np.all(np.abs(np.tensordot(e, f, axes=1)) <= 1e-12 * np.abs(f).sum(axis=0))


class TestQuasiPositivity:
    def test_rothe(self, rothe):
        report = check_quasi_positivity(rothe, samples=200)
        assert report.passed
        assert report.species[2].min_face_value >= 0.0
        assert any("product" in case for case in report.species[2].structural_cases)

    def test_mmh(self, mmh):
        assert check_quasi_positivity(mmh, samples=200).passed

    def test_deterministic(self, polymer):
        assert check_quasi_positivity(polymer, samples=50, seed=3) == check_quasi_positivity(polymer, samples=50, seed=3)

    def test_rejects_invalid_rate_before_check(self):
        with pytest.raises(ValidationError):
            NetworkSpec(("A1", "A2", "A3"), (ReactionSpec(0, 1, 2, Fraction(1), Fraction(-1)),))


class TestGrowthBounds:
    def test_polymer_sorted_order(self, polymer):
        sort = sort_block_triangular(build_matrix(polymer))
        bounds = growth_bound_check(polymer, sort, [1.0, 2.0, 0.5, 0.25])
        assert [b.species for b in bounds] == ["A1", "A2", "A3", "A4"]
        assert all(b.holds for b in bounds)

    def test_polymer_random_states(self, polymer):
        sort = sort_block_triangular(build_matrix(polymer))
        rng = np.random.default_rng(12)
        for c in rng.uniform(0.0, 10.0, size=(1000, 4)):
            assert all(b.holds for b in growth_bound_check(polymer, sort, c))

    def test_random_unit_networks(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            n_species = int(rng.integers(3, 9))
            spec = _random_unit_network(rng, n_species, int(rng.integers(1, 10)))
            sort = sort_block_triangular(build_matrix(spec))
            for c in rng.uniform(0.0, 5.0, size=(10, n_species)):
                assert all(b.holds for b in growth_bound_check(spec, sort, c))
