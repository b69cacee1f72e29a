import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlrra.netmodel import (
    Allocation,
    NetworkRealization,
    ScenarioConfig,
    alpha,
    bs_positions,
    cqi_quantize,
    feasible_power_vectors,
    location_indicator,
    network_utility,
    noise_power,
    sample_realization,
    served_sinr,
    sinr,
)


def hand_realization(gain, users_per_cell, noise_w=1e-14):
    gain = np.asarray(gain, dtype=float)
    n_users, k, _ = gain.shape
    return NetworkRealization(
        bs_positions=np.zeros((k, 2)),
        user_positions=np.zeros((n_users, 2)),
        serving=np.repeat(np.arange(k), users_per_cell),
        distance=np.ones(n_users),
        gain=gain,
        noise_w=noise_w,
    )


def naive_utility(real, power_idx, assign, cfg):
    """Triple sum over cells, users and sub-bands with the indicator, written without vectorisation."""
    a = -1.5 / math.log(5 * cfg.target_ber)
    total = 0.0
    for k in range(cfg.num_cells):
        for j in range(cfg.users_per_cell):
            u = k * cfg.users_per_cell + j
            for f in range(cfg.subbands):
                if assign[k][f] != j:
                    continue
                sig = cfg.power_levels[power_idx[k][f]] * real.gain[u, k, f]
                intf = 0.0
                for l in range(cfg.num_cells):
                    if l != k:
                        intf += cfg.power_levels[power_idx[l][f]] * real.gain[u, l, f]
                total += cfg.subband_bandwidth * math.log2(1 + a * sig / (real.noise_w + intf))
    return total


class TestAlpha:
    def test_default_ber(self):
        # -1.5 / ln(5e-6), evaluated independently
        assert alpha(1e-6) == pytest.approx(0.12288965038638332, rel=1e-12)

    def test_unit_value(self):
        assert alpha(math.exp(-1.5) / 5) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("ber", [0.2, 0.5, 0.0, -1e-3])
    def test_domain_error(self, ber):
        with pytest.raises(ValueError):
            alpha(ber)


class TestNoise:
    def test_default_bandwidth(self):
        assert noise_power(-174, 2.88e6) == pytest.approx(1.1465486511940728e-14, rel=1e-12)

    def test_microwatt(self):
        assert noise_power(-30, 1) == pytest.approx(1e-6, rel=1e-12)

    def test_one_megahertz(self):
        assert noise_power(-174, 1e6) == pytest.approx(3.9810717055349695e-15, rel=1e-12)

    def test_bad_bandwidth(self):
        with pytest.raises(ValueError):
            noise_power(-174, 0)


class TestScenarioConfig:
    def test_full_scale_defaults(self):
        cfg = ScenarioConfig()
        assert (cfg.num_cells, cfg.users_per_cell, cfg.subbands) == (5, 5, 3)
        assert cfg.power_levels == (6.4, 12.8, 19.2)
        assert cfg.max_power == 40.0 and cfg.cell_radius == 500.0

    @pytest.mark.parametrize("kwargs", [
        {"power_levels": (12.8, 6.4)},
        {"power_levels": (0.0, 6.4)},
        {"power_levels": (20.0,), "subbands": 3},
        {"bits_per_field": 2},
        {"target_ber": 0.25},
        {"bs_layout": "ring"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ScenarioConfig(**kwargs)

    def test_text_round_trip(self, tmp_path):
        cfg = ScenarioConfig(num_cells=3, power_levels=(1.5, 2.5), max_power=10.0, rng_seed=7)
        path = tmp_path / "scenario.cfg"
        path.write_text(cfg.to_text())
        assert ScenarioConfig.from_file(path) == cfg

    def test_comments_and_unknown_keys(self):
        cfg = ScenarioConfig.from_text("# scenario\nnum_cells = 2  # two BSs\n\nsubbands=1\n")
        assert cfg.num_cells == 2 and cfg.subbands == 1
        with pytest.raises(ValueError):
            ScenarioConfig.from_text("cells = 2\n")

    def test_fingerprint_ignores_seed(self):
        assert ScenarioConfig(rng_seed=1).fingerprint() == ScenarioConfig(rng_seed=2).fingerprint()
        assert ScenarioConfig(num_cells=4).fingerprint() != ScenarioConfig().fingerprint()


class TestRealization:
    def test_deterministic(self):
        cfg = ScenarioConfig()
        a, b = sample_realization(cfg, 11), sample_realization(cfg, 11)
        for name in ("user_positions", "gain", "cqi", "location", "ref_power_idx"):
            assert np.array_equal(getattr(a, name), getattr(b, name))
        assert not np.array_equal(a.gain, sample_realization(cfg, 12).gain)

    def test_full_scale_shape(self):
        real = sample_realization(ScenarioConfig(), 0)
        assert real.gain.shape == (25, 5, 3)
        assert real.cqi.shape == (25, 3)
        assert np.all(np.isfinite(real.gain)) and np.all(real.gain > 0)

    def test_users_inside_parent_cell(self):
        cfg = ScenarioConfig()
        real = sample_realization(cfg, 3)
        d = np.linalg.norm(real.user_positions - real.bs_positions[real.serving], axis=1)
        assert np.all(d <= cfg.cell_radius)
        np.testing.assert_allclose(d, real.distance)
        assert np.array_equal(real.location, (d > cfg.cell_radius / 2).astype(int))

    def test_pure_path_loss_monotone(self):
        cfg = ScenarioConfig(shadowing_sigma=0.0)
        real = sample_realization(cfg, 5, fading=False)
        dist = np.linalg.norm(real.user_positions[:, None] - real.bs_positions[None], axis=-1).ravel()
        g = real.gain[:, :, 0].ravel()
        order = np.argsort(dist)
        assert np.all(np.diff(g[order]) <= 0)
        assert np.all(real.gain == real.gain[:, :, :1])

    def test_reference_powers_feasible(self):
        cfg = ScenarioConfig()
        vectors = set(feasible_power_vectors(cfg))
        for seed in range(20):
            real = sample_realization(cfg, seed)
            assert all(tuple(row) in vectors for row in real.ref_power_idx)

    @pytest.mark.parametrize("layout", ["hex", "linear"])
    def test_inter_site_distance(self, layout):
        cfg = ScenarioConfig(num_cells=7, bs_layout=layout)
        pos = bs_positions(cfg)
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        np.testing.assert_allclose(d.min(axis=1), cfg.cell_radius)


class TestSinr:
    def test_single_cell(self):
        real = hand_realization([[[2e-10]]], 1, noise_w=1e-14)
        assert sinr(real, [[12.8]], 0, 0, 0) == pytest.approx(12.8 * 2e-10 / 1e-14, rel=1e-15)

    def test_silent_interferer_equals_single_cell(self):
        real = hand_realization([[[1e-10], [3e-11]], [[5e-12], [2e-10]]], 1)
        assert sinr(real, [[12.8], [0.0]], 0, 0, 0) == pytest.approx(12.8 * 1e-10 / 1e-14, rel=1e-15)

    def test_two_cell_hand_value(self):
        real = hand_realization([[[1e-10], [1e-12]], [[1e-12], [1e-10]]], 1, noise_w=1.146e-14)
        assert sinr(real, [[12.8], [12.8]], 0, 0, 0) == pytest.approx(99.91054883674461, rel=1e-12)

    def test_wrong_cell(self):
        real = hand_realization(np.ones((2, 2, 1)), 1)
        with pytest.raises(ValueError):
            sinr(real, np.ones((2, 1)), 0, 1, 0)

    def test_vectorised_matches_scalar(self):
        cfg = ScenarioConfig(num_cells=3, users_per_cell=2, subbands=2)
        real = sample_realization(cfg, 1)
        p = np.asarray(cfg.power_levels)[real.ref_power_idx]
        s = served_sinr(real.gain, real.serving, p, real.noise_w)
        for u in range(cfg.total_users):
            for f in range(cfg.subbands):
                assert s[u, f] == pytest.approx(sinr(real, p, u, real.serving[u], f), rel=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 50.0), st.floats(1.01, 3.0))
    def test_monotone_in_serving_power(self, seed, p, factor):
        cfg = ScenarioConfig(num_cells=3, users_per_cell=2, subbands=2)
        real = sample_realization(cfg, seed)
        powers = np.full((3, 2), 10.0)
        powers[0, 1] = p
        lo = sinr(real, powers, 0, 0, 1)
        powers[0, 1] = p * factor
        assert sinr(real, powers, 0, 0, 1) > lo

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(1.0, 20.0))
    def test_interference_never_helps(self, seed, extra):
        cfg = ScenarioConfig(num_cells=3, users_per_cell=2, subbands=2)
        real = sample_realization(cfg, seed)
        powers = np.full((3, 2), 10.0)
        before = served_sinr(real.gain, real.serving, powers, real.noise_w)
        powers[2, 0] += extra
        after = served_sinr(real.gain, real.serving, powers, real.noise_w)
        victims = real.serving != 2
        assert np.all(after[victims, 0] <= before[victims, 0])


class TestUtility:
    def test_zero_gain(self):
        cfg = ScenarioConfig(num_cells=2, users_per_cell=1, subbands=1)
        real = hand_realization(np.zeros((2, 2, 1)), 1)
        alloc = Allocation(np.zeros((2, 1), int), np.zeros((2, 1), int))
        assert network_utility(real, alloc, cfg) == 0.0

    def test_single_term(self):
        cfg = ScenarioConfig(num_cells=1, users_per_cell=1, subbands=1, power_levels=(10.0,), max_power=10.0)
        real = hand_realization([[[37e-14]]], 1, noise_w=1e-13)
        alloc = Allocation(np.zeros((1, 1), int), np.zeros((1, 1), int))
        # SINR = 10 * 37e-14 / 1e-13 = 37
        assert network_utility(real, alloc, cfg) == pytest.approx(7118456.126159422, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.data())
    def test_matches_naive_sum(self, seed, data):
        cfg = ScenarioConfig(num_cells=2, users_per_cell=3, subbands=2)
        real = sample_realization(cfg, seed)
        vectors = feasible_power_vectors(cfg)
        power_idx = [vectors[data.draw(st.integers(0, len(vectors) - 1))] for _ in range(2)]
        assign = [[data.draw(st.integers(0, 2)) for _ in range(2)] for _ in range(2)]
        alloc = Allocation(np.array(power_idx), np.array(assign))
        assert network_utility(real, alloc, cfg) == pytest.approx(naive_utility(real, power_idx, assign, cfg), rel=1e-12)

    def test_linear_in_bandwidth(self):
        cfg = ScenarioConfig(num_cells=2, users_per_cell=2, subbands=2)
        real = sample_realization(cfg, 4)
        alloc = Allocation(real.ref_power_idx, np.zeros((2, 2), int))
        wide = ScenarioConfig(num_cells=2, users_per_cell=2, subbands=2, subband_bandwidth=2 * cfg.subband_bandwidth)
        assert network_utility(real, alloc, wide) == pytest.approx(2 * network_utility(real, alloc, cfg), rel=1e-12)


class TestCqi:
    @pytest.mark.parametrize("db,expected", [(-20, 0), (-10, 0), (35, 15), (30, 15), (10, 8), (29.99, 15), (-7.5, 1)])
    def test_values(self, db, expected):
        assert cqi_quantize(db) == expected

    def test_minus_infinity(self):
        assert cqi_quantize(-np.inf) == 0

    @given(st.floats(-50, 50), st.floats(-50, 50))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        assert cqi_quantize(lo) <= cqi_quantize(hi)

    def test_surjective(self):
        grid = np.linspace(-10, 30, 4001)
        assert set(cqi_quantize(grid).tolist()) == set(range(16))


class TestLocation:
    @pytest.mark.parametrize("d,expected", [(300, 1), (100, 0), (250, 0), (250.0001, 1), (0, 0)])
    def test_values(self, d, expected):
        assert location_indicator(d, 500) == expected


class TestFeasibility:
    def test_default_levels(self):
        cfg = ScenarioConfig()
        vectors = feasible_power_vectors(cfg)
        assert len(vectors) == 17
        assert vectors == sorted(vectors)

    def test_single_subband(self):
        cfg = ScenarioConfig(subbands=1)
        assert feasible_power_vectors(cfg) == [(0,), (1,), (2,)]

    def test_unbounded_five_by_five(self):
        cfg = ScenarioConfig(subbands=5, power_levels=(1, 2, 3, 4, 5), max_power=25.0)
        assert len(feasible_power_vectors(cfg)) == 5**5 == 3125

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(1, 20), min_size=1, max_size=4, unique=True), st.integers(1, 3), st.integers(0, 60))
    def test_equals_brute_force(self, levels, f, slack):
        levels = sorted(levels)
        cfg = ScenarioConfig(num_cells=1, users_per_cell=1, subbands=f, power_levels=tuple(levels),
                             max_power=levels[0] * f + slack, bits_per_field=3)
        brute = [t for t in itertools.product(range(len(levels)), repeat=f)
                 if sum(levels[i] for i in t) <= cfg.max_power]
        assert feasible_power_vectors(cfg) == brute
