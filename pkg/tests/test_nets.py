import itertools

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from scheffe_robust import haar
from scheffe_robust.errors import ConfigurationError, EmptyNetError
from scheffe_robust.measures import tv_distance
from scheffe_robust.nets import (
    CoveringNet,
    build_greedy_packing,
    covering_radius,
    finite_space,
    gaussian_location_space,
    haar_density_space,
    local_entropy,
    low_rank_space,
    net_from_centers,
    record_probe_radius,
    space_from_spec,
    sparse_regression_space,
    white_noise_space,
)


def brute_max_packing(tv, delta):
    """Largest subset with pairwise TV >= delta, by exhaustive search."""
    m = len(tv)
    for size in range(m, 0, -1):
        for subset in itertools.combinations(range(m), size):
            if all(tv[i, j] >= delta for i, j in itertools.combinations(subset, 2)):
                return size
    return 0


def _spacing_for_tv(target):
    return optimize.brentq(lambda d: 2 * stats.norm.cdf(d / 2) - 1 - target, 1e-9, 20)


class TestGreedyPacking:
    def test_single_center_when_delta_exceeds_diameter(self):
        net = build_greedy_packing(gaussian_location_space(-1, 1, 101), 0.99)
        assert net.m == 1

    def test_gaussian_grid_size(self):
        delta = 0.1
        spacing = _spacing_for_tv(delta)
        assert abs(spacing - 0.2513226937101482) < 1e-9
        net = build_greedy_packing(gaussian_location_space(), delta)
        assert net.m == int(np.floor(2 / spacing)) + 1 == 8
        # exhaustive 1-D oracle: sweeping left to right is optimal on a line
        grid = np.linspace(-1, 1, 2001)
        chosen = [grid[0]]
        for g in grid[1:]:
            if 2 * stats.norm.cdf((g - chosen[-1]) / 2) - 1 >= delta:
                chosen.append(g)
        assert len(chosen) == net.m

    def test_sparse_regression_matches_brute_force(self):
        space = sparse_regression_space(4, 1, radius=1.0, levels=[-0.4, -0.2, 0.2, 0.4])
        cands = space.candidates(100)
        assert len(cands) == 16
        net = build_greedy_packing(space, 0.05)
        full = net_from_centers("regression", cands, 0.05, **space.nuisance)
        assert net.m == brute_max_packing(full.tv_matrix, 0.05)

    def test_packing_covering_and_consistency(self):
        space = sparse_regression_space(3, 2, radius=1.0, levels=[-0.5, 0.5])
        net = build_greedy_packing(space, 0.15)
        assert net.min_separation() >= 0.15
        cands = space.candidates(1000)
        assert covering_radius(net, cands) < 0.15
        models = net.models
        for i, j in itertools.combinations(range(net.m), 2):
            assert abs(net.tv_matrix[i, j] - tv_distance(models[i], models[j])) < 1e-9

    @pytest.mark.parametrize("seed", range(8))
    def test_small_spaces_against_exhaustive(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(5, 21))
        cands = rng.uniform(-1.5, 1.5, (k, 2))
        space = finite_space("gaussian-location", cands)
        delta = float(rng.uniform(0.1, 0.5))
        net = build_greedy_packing(space, delta)
        full = net_from_centers("gaussian-location", cands, delta)
        best = brute_max_packing(full.tv_matrix, delta)
        assert best / 2 <= net.m <= best
        assert covering_radius(net, cands) < delta

    def test_deterministic(self):
        space = low_rank_space(2, 3, 1, radius=2.0)
        a = build_greedy_packing(space, 0.3, budget=400, seed=5)
        b = build_greedy_packing(space, 0.3, budget=400, seed=5)
        assert np.array_equal(a.centers, b.centers)

    def test_low_rank_members(self):
        space = low_rank_space(2, 3, 1, radius=2.0)
        for A in space.candidates(200, seed=1):
            assert np.linalg.matrix_rank(A, tol=1e-9) <= 1 and np.linalg.norm(A) <= 2.0 + 1e-12

    def test_haar_members_are_valid_densities(self):
        space = haar_density_space(beta=1.0, scale=1.0, max_level=2)
        net = build_greedy_packing(space, 0.15, budget=2000)
        caps = haar.holder_bounds(2, 1.0, 1.0)
        for c in net.centers:
            assert haar.synthesize(c, base=1.0).min() >= -1e-12
            assert np.all(np.abs(c) <= caps * (1 + 1e-9))
            assert haar.wavelet_sup_norm(c) <= 1.0 / (1 - 0.5) + 1e-12

    def test_errors(self):
        with pytest.raises(ConfigurationError):
            build_greedy_packing(gaussian_location_space(), 0.0)
        empty = finite_space("gaussian-location", np.zeros((0, 1)))
        with pytest.raises(EmptyNetError):
            build_greedy_packing(empty, 0.1)

    def test_truncation_cap(self):
        net = build_greedy_packing(gaussian_location_space(-5, 5, 1001), 0.01, max_centers=10)
        assert net.m == 10 and net.truncated

    def test_probe_radius_recorded(self):
        space = white_noise_space(1.0, 1.0, 1)
        net = build_greedy_packing(space, 0.2, budget=500)
        r = record_probe_radius(net, space, 300, seed=9)
        assert net.probe_radius == r and r >= 0


class TestSerialisation:
    @pytest.mark.parametrize(
        "space",
        [gaussian_location_space(), low_rank_space(2, 2, 1, 1.0), haar_density_space(1.0, 1.0, 1)],
    )
    def test_bit_exact_roundtrip(self, space, tmp_path):
        net = build_greedy_packing(space, 0.2, budget=300)
        path = tmp_path / "net.json"
        net.save(path)
        back = CoveringNet.load(path)
        assert back.family == net.family and back.delta == net.delta
        assert np.array_equal(back.centers, net.centers)
        assert np.array_equal(back.tv_matrix, net.tv_matrix)
        assert back.nuisance == net.nuisance

    def test_space_from_spec(self):
        sp = space_from_spec({"family": "regression", "p": 3, "s": 1, "radius": 1.0, "levels": [0.5]})
        assert sp.enumerable and len(sp.candidates(100)) == 3
        with pytest.raises(ConfigurationError):
            space_from_spec({"family": "regression"})
        with pytest.raises(ConfigurationError):
            space_from_spec({"family": "nope"})


class TestLocalEntropy:
    def test_single_center(self):
        net = net_from_centers("gaussian-location", [[0.0]], 0.1)
        assert local_entropy(net) == []

    def test_three_centres(self):
        # neighbours just beyond delta, the outer pair just under 2 delta
        delta = 0.1
        step = _spacing_for_tv(delta) * (1 + 1e-9)
        net = net_from_centers("gaussian-location", [[-step], [0.0], [step]], delta)
        tv = net.tv_matrix
        assert delta < tv[0, 1] < delta * (1 + 1e-6) and delta < tv[0, 2] < 2 * delta
        counts = local_entropy(net)
        assert counts[0] == 0 and counts[1] == 2

    def test_counting_bound(self, rng):
        for _ in range(10):
            cands = rng.uniform(-2, 2, (30, 2))
            net = build_greedy_packing(finite_space("gaussian-location", cands), 0.2)
            assert sum(local_entropy(net)) <= max(0, net.m - 1) * len(local_entropy(net) or [1])
            for j in range(net.m):
                assert np.count_nonzero(np.delete(net.tv_matrix[j], j) > 0) <= net.m - 1
            assert max(local_entropy(net) or [0]) <= net.m - 1


class TestRegressionSandwich:
    def test_tv_between_linear_bounds(self, rng):
        # C1 a <= TV <= C2 a for a <= a_max, with C2 = E|Z| / sqrt(2 pi) and
        # C1 = E[exp(-a_max^2 Z^2 / 8) |Z|] / sqrt(2 pi)
        a_max = 2.0
        c2 = np.sqrt(2 / np.pi) / np.sqrt(2 * np.pi)
        c1 = integrate.quad(lambda z: np.exp(-(a_max**2) * z * z / 8) * abs(z) * stats.norm.pdf(z), -40, 40, points=[0])[0]
        c1 /= np.sqrt(2 * np.pi)
        for family_p in (3, 6):
            space = sparse_regression_space(family_p, 2, radius=1.0, cov=np.diag(np.linspace(1, 4, family_p)))
            cands = space.candidates(200, seed=family_p)
            net = net_from_centers("regression", cands, 0.0, **space.nuisance)
            model = net.models[0]
            a = model.signal_to_noise(cands)
            tv = net.tv_matrix[0]
            keep = (a > 0) & (a <= a_max)
            assert np.all(tv[keep] <= c2 * a[keep] + 1e-12)
            assert np.all(tv[keep] >= c1 * a[keep] - 1e-12)
