import json

import numpy as np
import pytest

from scheffe_robust.errors import ConfigurationError, DomainError
from scheffe_robust.measures import ContaminatedSource, EmpiricalMeasure, GaussianLocation, PointMass, sample
from scheffe_robust.nets import local_entropy, net_from_centers
from scheffe_robust.scheffe import build_scheffe_set, scheffe_test
from scheffe_robust.tournament import (
    ScheffeTournament,
    failure_bound,
    global_failure_bound,
    local_failure_bound,
    run_tournament,
    yatracos_minimum_distance,
)

NET3 = net_from_centers("gaussian-location", [[-1.0], [0.0], [1.0]])


def _data(mean, n, seed, eps=0.0, q=None):
    src = ContaminatedSource(eps, GaussianLocation([mean]), q or PointMass(0.0))
    return sample(src, n, seed=seed)


class TestRunTournament:
    def test_single_center(self):
        net = net_from_centers("gaussian-location", [[0.3]])
        res = run_tournament(net, _data(0.0, 10, 0))
        assert res.winner_index == 0 and res.loss_counts.tolist() == [0] and res.tie_set == [0]

    def test_clean_recovery(self):
        wins = sum(run_tournament(NET3, _data(0.0, 500, s)).winner_index == 1 for s in range(100))
        assert wins >= 99

    def test_contaminated_recovery_vs_sample_mean(self):
        tour = ScheffeTournament(NET3)
        robust = naive = 0
        for s in range(100):
            d = _data(0.0, 500, s, eps=0.15, q=PointMass(25.0))
            robust += tour.run(d).winner_index == 1
            naive += int(np.argmin(np.abs(NET3.centers[:, 0] - d.samples.mean()))) == 2
        assert robust >= 95 and naive >= 95

    def test_pairwise_entries_are_scheffe_tests(self, rng):
        net = net_from_centers("gaussian-location", rng.uniform(-2, 2, (5, 1)))
        d = EmpiricalMeasure(rng.normal(0.3, 1, (200, 1)))
        res = run_tournament(net, d)
        for j in range(net.m):
            for k in range(j + 1, net.m):
                dec = scheffe_test(build_scheffe_set(net.model(j), net.model(k)), d)
                assert res.pairwise_decisions[j, k] == dec.phi
                # mirror orientation: theta_j favoured means theta_k loses
                tie = abs(dec.stat0 - dec.stat1) <= 1e-12
                assert res.pairwise_decisions[k, j] == (0 if tie else 1 - dec.phi)
        assert res.loss_counts[res.winner_index] == res.loss_counts.min()
        assert res.winner_index in res.tie_set and res.winner_index == min(res.tie_set)

    def test_permutation_equivariance(self, rng):
        for _ in range(20):
            centers = rng.uniform(-2, 2, (6, 1))
            d = EmpiricalMeasure(rng.normal(rng.uniform(-2, 2), 1, (300, 1)))
            res = run_tournament(net_from_centers("gaussian-location", centers), d)
            if len(res.tie_set) > 1:
                continue
            perm = rng.permutation(6)
            res2 = run_tournament(net_from_centers("gaussian-location", centers[perm]), d)
            assert perm[res2.winner_index] == res.winner_index

    def test_duplicate_centres_skipped(self):
        net = net_from_centers("gaussian-location", [[0.0], [0.0], [1.0]])
        res = run_tournament(net, _data(0.0, 300, 1))
        assert res.skipped_pairs == [(0, 1)]
        assert res.pairwise_decisions[0, 1] == res.pairwise_decisions[1, 0] == 0
        assert res.winner_index == 0

    def test_adversarial_replacement(self, rng):
        net = net_from_centers("gaussian-location", [[-1.0], [0.0], [1.0], [2.0]])
        tour = ScheffeTournament(net)
        n = 400
        for _ in range(30):
            x = rng.normal(rng.uniform(-1, 2), 1, (n, 1))
            base = tour.run(EmpiricalMeasure(x))
            margins = tour.pairwise_margins(EmpiricalMeasure(x))[np.triu_indices(4, 1)]
            k = 3
            y = x.copy()
            y[rng.choice(n, k, replace=False)] = rng.uniform(-1e3, 1e3, (k, 1))
            if margins.min() > 2 * k / n:
                assert tour.run(EmpiricalMeasure(y)).winner_index == base.winner_index

    def test_serialisable(self):
        res = run_tournament(NET3, _data(0.0, 50, 2))
        back = json.loads(json.dumps(res.to_dict()))
        assert back["winner_index"] == res.winner_index

    def test_empty_data(self):
        with pytest.raises(ConfigurationError):
            run_tournament(NET3, EmpiricalMeasure(np.zeros((0, 1))))


class TestFastPaths:
    @pytest.mark.parametrize("kind", ["line", "cells"])
    def test_match_pointwise_comparison(self, kind, rng):
        if kind == "line":
            net = net_from_centers("gaussian-location", rng.uniform(-2, 2, (9, 1)))
            data = EmpiricalMeasure(np.vstack([rng.normal(0.2, 1.3, (500, 1)), [[50.0]], [[-50.0]]]))
        else:
            from scheffe_robust.models import random_holder_coefficients

            centers = [random_holder_coefficients(rng, 2, 1.0, 1.0) for _ in range(9)]
            centers.append(np.zeros(7))
            centers.append(np.array([1.0, 0, 0, 0, 0, 0, 0]))  # vanishes on [1/2, 1)
            net = net_from_centers("haar-density", centers, max_level=2)
            data = EmpiricalMeasure(np.vstack([rng.random((500, 1)), [[1.5]], [[-0.2]]]))
        tour = ScheffeTournament(net)
        assert tour._fast_path() == kind
        fast = tour.pairwise_frequencies(data)
        slow = tour.pairwise_frequencies(data, tour.log_densities(data))
        np.testing.assert_allclose(fast, slow, atol=1e-15)
        assert tour.run(data).winner_index == tour.run(data, tour.log_densities(data)).winner_index


class TestYatracos:
    def test_needs_two_centres(self):
        with pytest.raises(ConfigurationError):
            yatracos_minimum_distance(net_from_centers("gaussian-location", [[0.0]]), _data(0, 5, 0))

    def test_two_centres_agree_with_tournament(self, rng):
        for s in range(100):
            a, b = rng.uniform(-1, 1, 2)
            net = net_from_centers("gaussian-location", [[a], [b]])
            d = _data(rng.uniform(-1, 1), int(rng.integers(5, 80)), s)
            assert yatracos_minimum_distance(net, d) == run_tournament(net, d).winner_index

    def test_exact_cell_frequencies(self):
        # centers 1 + c psi_00 with c in {-0.5, 0, 0.5}; data at cell midpoints with frequencies 3/4, 1/4
        net = net_from_centers("haar-density", [[-0.5], [0.0], [0.5]], max_level=0)
        d = EmpiricalMeasure([[0.25], [0.25], [0.25], [0.75]])
        assert yatracos_minimum_distance(net, d) == 2
        assert run_tournament(net, d).winner_index == 2

    def test_agreement_rate_is_high_on_clean_data(self):
        tour = ScheffeTournament(NET3)
        agree = sum(tour.yatracos(d) == tour.run(d).winner_index for d in (_data(0.2, 200, s) for s in range(100)))
        assert agree >= 90


class TestBounds:
    def test_single_center(self):
        assert np.isclose(global_failure_bound(1, 0.0, 0.0, 0.4, 100), 4 * np.exp(-100 * 0.16 / 32))

    def test_arithmetic_example(self):
        v = global_failure_bound(3, 0.05, 0.02, 0.6, 500)
        assert np.isclose(v, 36 * np.exp(-250 * (0.15 - 0.14) ** 2))

    def test_domain(self):
        with pytest.raises(DomainError):
            global_failure_bound(3, 0.05, 0.02, 0.5, 500)
        with pytest.raises(DomainError):
            local_failure_bound([0, 2], 0.1, 0.0, 6, 100)
        with pytest.raises(DomainError):
            local_failure_bound([0, 2], 0.1, 0.0, 4, 100)

    def test_local_form_on_measured_counts(self):
        delta = 0.05
        net = net_from_centers("gaussian-location", [[-1.0], [0.0], [1.0]], delta)
        counts = local_entropy(net)
        shells, n, eps = 12, 2000, 0.0
        v = local_failure_bound(counts, delta, eps, shells, n)
        # direct evaluation of the two sums
        first = sum(counts[l] * np.exp(-0.5 * n * (l * delta - 2 * (eps + delta)) ** 2) for l in range(len(counts)) if l >= 3)
        inner = sum(counts[:3])
        second = sum(counts[l] * np.exp(-0.5 * n * ((l - 9) * delta - 2 * (eps + delta)) ** 2)
                     for l in range(len(counts)) if l >= 12)
        assert np.isclose(v, 2 * first + 2 * inner * second)
        assert failure_bound(counts, delta, eps, None, n, shells=shells) == v

    def test_other_split_constant(self):
        v = global_failure_bound(3, 0.0, 0.0, 1.0, 100, c=0.3)
        a, b = 0.3, 0.7 - 0.6
        assert np.isclose(v, 6 * np.exp(-50 * a * a) + 18 * np.exp(-50 * b * b))
