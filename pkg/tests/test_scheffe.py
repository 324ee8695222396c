import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from scheffe_robust.errors import ConfigurationError, DegenerateSetError, DomainError
from scheffe_robust.measures import (
    ContaminatedSource,
    EmpiricalMeasure,
    GaussianLocation,
    HaarDensity,
    LinearRegression,
    PointMass,
    ShiftedGaussian,
    WhiteNoiseSequence,
    sample,
    tv_distance,
)
from scheffe_robust.scheffe import (
    TIE_TOL,
    build_scheffe_set,
    decide,
    estimate_error_exponent,
    huber_clipped_test,
    lrt_test,
    scheffe_error_bound,
    scheffe_test,
)

P0, P1 = GaussianLocation([0.0]), GaussianLocation([1.0])


def _phi_erf(x):
    return 0.5 * (1 + special.erf(x / np.sqrt(2)))


class TestBuildSet:
    def test_gaussian_pair(self):
        s = build_scheffe_set(P0, P1)
        grid = np.linspace(-5, 5, 100_001).reshape(-1, 1)
        inside = s.member(grid)
        # oracle: pointwise comparison locates the boundary at 1/2
        boundary = grid[np.flatnonzero(~inside)[0], 0]
        assert abs(boundary - 0.5) <= 1e-4
        assert abs(s.prob0 - _phi_erf(0.5)) < 1e-12 and abs(s.prob1 - _phi_erf(-0.5)) < 1e-12
        assert abs(s.prob0 - 0.6915) < 1e-4 and abs(s.prob1 - 0.3085) < 1e-4

    def test_haar_pair(self):
        s = build_scheffe_set(HaarDensity(np.zeros(1)), HaarDensity([1.0]))
        pts = np.array([[0.1], [0.49], [0.5], [0.9]])
        assert s.member(pts).tolist() == [False, False, True, True]
        assert s.prob0 == 0.5 and s.prob1 == 0.0

    def test_degenerate(self):
        with pytest.raises(DegenerateSetError):
            build_scheffe_set(P0, GaussianLocation([0.0]))

    @pytest.mark.parametrize(
        "pair",
        [
            (LinearRegression([1.0, -0.5], np.diag([1.0, 3.0]), 0.8), LinearRegression([0.2, 0.4], np.diag([1.0, 3.0]), 0.8)),
            (WhiteNoiseSequence([0.3, -0.1, 0.2]), WhiteNoiseSequence([0.0, 0.5, 0.0])),
            (HaarDensity([0.2, -0.1, 0.3]), HaarDensity([-0.4, 0.2, 0.0])),
        ],
    )
    def test_separation_is_tv(self, pair):
        s = build_scheffe_set(*pair)
        assert abs(s.separation - tv_distance(*pair)) < 1e-6


class TestDecision:
    def test_atoms_inside(self):
        d = decide(1.0, 0.9, 0.1)
        assert d.phi == 0 and np.isclose(d.stat0, 0.1) and np.isclose(d.stat1, 0.9)

    def test_tie_keeps_null(self):
        assert decide(0.5, 0.6, 0.4).phi == 0
        assert decide(0.5, 0.6, 0.4 + TIE_TOL / 10).phi == 0

    def test_empty_data(self):
        s = build_scheffe_set(P0, P1)
        with pytest.raises(ConfigurationError):
            scheffe_test(s, EmpiricalMeasure(np.zeros((0, 1))))

    def test_clean_null(self):
        s = build_scheffe_set(P0, P1)
        fails = sum(scheffe_test(s, sample(ContaminatedSource(0.0, P0), 200, seed=seed)).phi for seed in range(100))
        assert fails <= 1

    def test_contaminated_null(self):
        s = build_scheffe_set(P0, P1)
        src = ContaminatedSource(0.1, P0, PointMass(10.0))
        fails = sum(scheffe_test(s, sample(src, 500, seed=seed)).phi for seed in range(100))
        assert fails <= 1

    def test_permutation_invariance(self, rng):
        s = build_scheffe_set(P0, P1)
        x = rng.normal(0.4, 1, (300, 1))
        a = scheffe_test(s, EmpiricalMeasure(x))
        b = scheffe_test(s, EmpiricalMeasure(x[rng.permutation(300)]))
        assert a == b

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 20), st.floats(-1e6, 1e6))
    def test_replacement_moves_statistic_by_k_over_n(self, seed, k, value):
        rng = np.random.default_rng(seed)
        s = build_scheffe_set(P0, P1)
        n = 200
        x = rng.normal(rng.uniform(-1, 2), 1, (n, 1))
        before = scheffe_test(s, EmpiricalMeasure(x))
        y = x.copy()
        y[rng.choice(n, k, replace=False)] = value
        after = scheffe_test(s, EmpiricalMeasure(y))
        assert abs(after.empirical - before.empirical) <= k / n + 1e-15
        # a margin of exactly 2k/n can be driven onto a tie
        if abs(before.stat0 - before.stat1) > 2 * k / n + 1e-9:
            assert after.phi == before.phi


class TestLikelihoodRatio:
    def test_symmetry_point(self):
        assert lrt_test(P0, P1, EmpiricalMeasure([[0.5]])).phi == 0

    def test_clean(self):
        flips = sum(lrt_test(P0, P1, sample(ContaminatedSource(0.0, P0), 100, seed=s)).phi for s in range(100))
        assert flips <= 1

    def test_single_outlier(self, rng):
        x = np.vstack([rng.normal(size=(10_000, 1)), [[1e6]]])
        assert lrt_test(P0, P1, EmpiricalMeasure(x)).phi == 1

    def test_infinite_ratios(self):
        p, q = HaarDensity(np.zeros(1)), HaarDensity([1.0])  # q vanishes on [1/2, 1)
        assert lrt_test(q, p, EmpiricalMeasure([[0.1], [0.7]])).phi == 1
        assert lrt_test(p, q, EmpiricalMeasure([[0.1], [0.7]])).phi == 0
        # one +inf and one -inf cancel, the finite part decides
        both = lrt_test(HaarDensity([1.0]), HaarDensity([-1.0]), EmpiricalMeasure([[0.1], [0.7]]))
        assert both.stat0 == 0.0 and both.phi == 0

    def test_clipped_degenerate(self, rng):
        x = rng.normal(size=(50, 1))
        d = huber_clipped_test(P0, P1, 1.0, 1.0, EmpiricalMeasure(x))
        assert d.phi == 0 and d.stat0 == 0.0

    def test_clipped_config(self):
        with pytest.raises(ConfigurationError):
            huber_clipped_test(P0, P1, 2.0, 1.0, EmpiricalMeasure([[0.0]]))
        with pytest.raises(ConfigurationError):
            huber_clipped_test(P0, P1, 0.0, 1.0, EmpiricalMeasure([[0.0]]))

    def test_clipping_inactive_recovers_lrt(self, rng):
        for _ in range(20):
            x = EmpiricalMeasure(rng.normal(rng.uniform(0, 1), 1, (30, 1)))
            assert huber_clipped_test(P0, P1, 1e-300, 1e300, x).phi == lrt_test(P0, P1, x).phi

    def test_clipped_resists_outliers(self):
        src = ContaminatedSource(0.1, P0, PointMass(1e6))
        fails = sum(huber_clipped_test(P0, P1, 0.1, 10.0, sample(src, 500, seed=s)).phi for s in range(100))
        assert fails <= 1


class TestErrorExponent:
    def test_bound_formula(self):
        assert np.isclose(scheffe_error_bound(0.5, 0.1, 100), 4 * np.exp(-50 * 0.09))
        with pytest.raises(DomainError):
            scheffe_error_bound(0.2, 0.1, 10)

    def test_identical_rejected(self):
        with pytest.raises(DomainError):
            estimate_error_exponent(P0, P0, 0.0, [PointMass(0.0)], [10, 20])

    def test_bad_grid(self):
        with pytest.raises(ConfigurationError):
            estimate_error_exponent(P0, P1, 0.0, [PointMass(0.0)], [20, 10])

    @pytest.mark.slow
    def test_clean_slope(self):
        tv = tv_distance(P0, P1)
        fit = estimate_error_exponent(P0, P1, 0.0, [PointMass(0.0)], [50, 100, 200, 400, 800], 10**4, seed=1)
        assert fit.slope >= 0.5 * tv**2 - 0.05
        for tot, se, b in zip(fit.total, fit.se, fit.bound):
            assert tot <= b + 3 * se

    @pytest.mark.slow
    def test_near_critical(self):
        tv = tv_distance(P0, P1)
        eps = tv / 2 - 0.01
        fit = estimate_error_exponent(
            P0, P1, eps, [PointMass(10.0), ShiftedGaussian(3.0)], [50, 100, 200, 400, 800], 4000, seed=2
        )
        assert fit.total[-1] < fit.total[0]
        assert fit.slope >= fit.floor - 0.01

    def test_censored(self):
        p1 = GaussianLocation([6.0])
        fit = estimate_error_exponent(P0, p1, 0.0, [PointMass(0.0)], [50, 100], 1000, seed=0)
        assert fit.censored and fit.n_fitted == 0
        assert np.isclose(fit.slope, np.log(4000) / 50)
