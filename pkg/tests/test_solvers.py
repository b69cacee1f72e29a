import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlrra.netmodel import Allocation, ScenarioConfig, feasible_power_vectors, network_utility, sample_realization
from dlrra.solvers import (
    GaConfig,
    GeneticSearch,
    SearchSpaceTooLarge,
    assign_subbands,
    batch_fitness,
    exhaustive_search,
    fitness,
    ga_solve,
    repair_cell,
)

SMALL = ScenarioConfig(num_cells=3, subbands=2, users_per_cell=3, power_levels=(6.4, 19.2), max_power=40.0,
                       bits_per_field=2)


def brute_force_assignment(real, powers_w, cfg):
    """Best assignment by enumerating every U^(K*F) choice (first maximum wins)."""
    power_idx = np.searchsorted(cfg.power_levels, powers_w)
    best, best_val = None, -np.inf
    fields = cfg.num_cells * cfg.subbands
    for choice in itertools.product(range(cfg.users_per_cell), repeat=fields):
        assign = np.array(choice).reshape(cfg.num_cells, cfg.subbands)
        val = network_utility(real, Allocation(power_idx, assign), cfg)
        if val > best_val:
            best, best_val = assign, val
    return best


def brute_force_power(real, cfg, order=None):
    """Exhaustive optimum written independently: every feasible tuple combination."""
    vectors = feasible_power_vectors(cfg)
    combos = list(itertools.product(vectors, repeat=cfg.num_cells))
    if order is not None:
        combos = [combos[i] for i in order]
    scored = [(fitness(real, np.array(c), cfg), c) for c in combos]
    best = max(v for v, _ in scored)
    return best, min(c for v, c in scored if v == best)


class TestAssignment:
    def test_single_user(self):
        cfg = ScenarioConfig(num_cells=2, users_per_cell=1, subbands=3)
        real = sample_realization(cfg, 0)
        assert np.all(assign_subbands(real, np.full((2, 3), 6.4), cfg) == 0)

    def test_dominant_user(self):
        cfg = ScenarioConfig(num_cells=2, users_per_cell=3, subbands=2)
        real = sample_realization(cfg, 1)
        real.gain[2] *= 1e6
        a = assign_subbands(real, np.full((2, 2), 6.4), cfg)
        assert np.all(a[0] == 2)

    def test_ties_go_to_lowest_index(self):
        cfg = ScenarioConfig(num_cells=1, users_per_cell=3, subbands=2)
        real = sample_realization(cfg, 2)
        real.gain[:] = 1e-10
        assert np.all(assign_subbands(real, np.full((1, 2), 6.4), cfg) == 0)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_brute_force(self, seed):
        cfg = ScenarioConfig(num_cells=2, users_per_cell=3, subbands=2)
        real = sample_realization(cfg, seed)
        powers = np.asarray(cfg.power_levels)[real.ref_power_idx]
        assert np.array_equal(assign_subbands(real, powers, cfg), brute_force_assignment(real, powers, cfg))


class TestFitness:
    def test_equals_utility_of_greedy_assignment(self):
        real = sample_realization(SMALL, 3)
        p = real.ref_power_idx
        a = assign_subbands(real, np.asarray(SMALL.power_levels)[p], SMALL)
        assert fitness(real, p, SMALL) == pytest.approx(network_utility(real, Allocation(p, a), SMALL), rel=1e-12)

    def test_equal_gains_ignore_tie_break(self):
        real = sample_realization(SMALL, 4)
        real.gain[:] = real.gain[:1]
        p = real.ref_power_idx
        vals = {network_utility(real, Allocation(p, np.full((3, 2), j)), SMALL) for j in range(3)}
        assert len(vals) == 1 and fitness(real, p, SMALL) == pytest.approx(vals.pop(), rel=1e-12)

    def test_bandwidth_doubles_fitness(self):
        real = sample_realization(SMALL, 5)
        wide = replace(SMALL, subband_bandwidth=2 * SMALL.subband_bandwidth)
        p = real.ref_power_idx
        assert fitness(real, p, wide) == pytest.approx(2 * fitness(real, p, SMALL), rel=1e-12)

    def test_batch_matches_single(self):
        real = sample_realization(SMALL, 6)
        stack = np.array([real.ref_power_idx, np.ones((3, 2), int), np.zeros((3, 2), int)])
        np.testing.assert_allclose(batch_fitness(real, stack, SMALL), [fitness(real, s, SMALL) for s in stack], rtol=1e-14)


class TestExhaustive:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_independent_enumeration(self, seed):
        real = sample_realization(SMALL, seed)
        res = exhaustive_search(real, SMALL)
        best, combo = brute_force_power(real, SMALL)
        assert res.allocation.utility == best
        assert np.array_equal(res.allocation.power_idx, np.array(combo))
        assert res.fitness_evals == 4**3

    def test_dominates_every_candidate(self):
        real = sample_realization(SMALL, 9)
        res = exhaustive_search(real, SMALL)
        for combo in itertools.product(feasible_power_vectors(SMALL), repeat=3):
            assert fitness(real, np.array(combo), SMALL) <= res.allocation.utility

    def test_order_invariant(self):
        real = sample_realization(SMALL, 10)
        order = np.random.default_rng(0).permutation(64)
        best, combo = brute_force_power(real, SMALL, order)
        res = exhaustive_search(real, SMALL)
        assert np.array_equal(res.allocation.power_idx, np.array(combo))
        assert res.allocation.utility == best

    def test_tie_break_is_lexicographic(self):
        # identical gains on every sub-band make swapped power vectors tie
        cfg = ScenarioConfig(num_cells=2, users_per_cell=1, subbands=2, power_levels=(6.4, 19.2), max_power=30.0,
                             bits_per_field=2)
        real = sample_realization(cfg, 0)
        real.gain[:] = real.gain[:, :, :1]
        res = exhaustive_search(real, cfg)
        _, combo = brute_force_power(real, cfg)
        assert np.array_equal(res.allocation.power_idx, np.array(combo))

    def test_table2_scale_count(self):
        cfg = ScenarioConfig(num_cells=4)
        res = exhaustive_search(sample_realization(cfg, 0), cfg)
        assert res.fitness_evals == 17**4 == 83521
        assert res.allocation.is_feasible(cfg)

    def test_refuses_fifteen_cell_example(self):
        cfg = ScenarioConfig(num_cells=15, subbands=5, power_levels=(1, 2, 3, 4, 5), max_power=25.0)
        with pytest.raises(SearchSpaceTooLarge) as info:
            exhaustive_search(sample_realization(cfg, 0), cfg)
        assert info.value.size == 3125**15

    def test_single_feasible_vector(self):
        cfg = ScenarioConfig(num_cells=3, subbands=2, users_per_cell=2, power_levels=(6.4, 19.2), max_power=12.8,
                             bits_per_field=2)
        res = exhaustive_search(sample_realization(cfg, 0), cfg)
        assert res.fitness_evals == 1
        assert np.all(res.allocation.power_idx == 0)


class TestRepair:
    def test_downgrades_largest(self):
        levels = np.array([6.4, 12.8, 19.2])
        assert repair_cell(np.array([2, 2, 2]), levels, 40.0).tolist() == [1, 1, 1]
        assert repair_cell(np.array([2, 2, 0]), levels, 40.0).tolist() == [1, 2, 0]
        assert repair_cell(np.array([0, 1, 2]), levels, 40.0).tolist() == [0, 1, 2]


class TestGenetic:
    def test_never_beats_oracle(self):
        for seed in range(20):
            real = sample_realization(SMALL, seed)
            g = ga_solve(real, SMALL, GaConfig(rng_seed=seed))
            assert g.allocation.utility <= exhaustive_search(real, SMALL).allocation.utility

    def test_deterministic(self):
        real = sample_realization(SMALL, 1)
        a, b = ga_solve(real, SMALL, GaConfig(rng_seed=3)), ga_solve(real, SMALL, GaConfig(rng_seed=3))
        assert np.array_equal(a.allocation.power_idx, b.allocation.power_idx)
        assert a.history == b.history and a.fitness_evals == b.fitness_evals

    def test_invariants_every_generation(self):
        cfg = ScenarioConfig(num_cells=4)
        search = GeneticSearch(sample_realization(cfg, 2), cfg, GaConfig(mutation_prob=0.3, rng_seed=1))
        levels = np.asarray(cfg.power_levels)
        for _ in range(40):
            prev = search.best_fitness
            search.step()
            assert search.best_fitness >= prev
            assert search.population.shape == (50, 12)
            sums = levels[search.population.reshape(50, 4, 3)].sum(axis=-1)
            assert np.all(sums <= cfg.max_power + 1e-9)
        assert search.history == sorted(search.history)

    def test_fixed_point(self):
        real = sample_realization(SMALL, 3)
        x = real.ref_power_idx.ravel()
        ga = GaConfig(population_size=10, elite_pairs=2, mutation_prob=0.0)
        search = GeneticSearch(real, SMALL, ga, initial_population=[x] * 10)
        for _ in range(15):
            search.step()
            assert np.all(search.population == x)

    def test_result_allocation_consistent(self):
        real = sample_realization(SMALL, 8)
        g = ga_solve(real, SMALL)
        assert g.allocation.is_feasible(SMALL)
        assert g.allocation.utility == pytest.approx(network_utility(real, g.allocation, SMALL), rel=1e-12)
        assert g.method == "ga"

    def test_max_generations_cap(self):
        real = sample_realization(SMALL, 8)
        g = ga_solve(real, SMALL, GaConfig(max_generations=3, convergence_eps=1.0))
        assert len(g.history) <= 4

    @pytest.mark.parametrize("kwargs", [{"mutation_prob": 1.5}, {"population_size": 4, "elite_pairs": 3}])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            GaConfig(**kwargs)

    def test_fewer_evaluations_than_exhaustive_at_table2_scale(self):
        cfg = ScenarioConfig(num_cells=4)
        for seed in range(3):
            real = sample_realization(cfg, seed)
            assert ga_solve(real, cfg, GaConfig(rng_seed=seed)).fitness_evals < exhaustive_search(real, cfg).fitness_evals


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 2), st.integers(1, 2), st.integers(1, 3))
def test_assignment_optimal_property(seed, k, f, u):
    cfg = ScenarioConfig(num_cells=k, subbands=f, users_per_cell=u)
    real = sample_realization(cfg, seed)
    powers = np.asarray(cfg.power_levels)[real.ref_power_idx]
    assert np.array_equal(assign_subbands(real, powers, cfg), brute_force_assignment(real, powers, cfg))
