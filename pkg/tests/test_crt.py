import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from lerwlab.crt import (CrtSample, is_tree_metric, ks_rayleigh, ks_statistic, rayleigh_fit,
                         rayleigh_survival, sample_crt_distances, sample_crt_matrices,
                         sample_cut_times)


def test_cut_times_increase():
    t = sample_cut_times(50, 1, size=2000)
    assert (np.diff(t, axis=1) > 0).all()


def test_first_cut_time_law():
    t1 = sample_cut_times(1, 2, size=10**6)[:, 0]
    p = np.mean(t1 > 1)
    assert abs(p - math.exp(-0.5)) <= 4 * math.sqrt(p * (1 - p) / 10**6)
    mean, _ = integrate.quad(lambda x: x * x * math.exp(-x * x / 2), 0, np.inf)
    assert abs(mean - math.sqrt(math.pi / 2)) < 1e-10
    assert abs(t1.mean() / mean - 1) < 0.01
    D = ks_statistic(t1, rayleigh_survival)
    assert D < 1.63 / math.sqrt(10**6)


def test_k2_distance_is_first_cut_time():
    for s in range(20):
        smp = sample_crt_distances(2, s)
        assert smp.distances[0, 1] == sample_cut_times(1, s)[0]


def test_k3_identity():
    for s in range(200):
        smp = sample_crt_distances(3, s)
        D, t = smp.distances, smp.cut_times
        assert abs(D[0, 2] + D[1, 2] - D[0, 1] - 2 * (t[1] - t[0])) < 1e-12


def test_four_point_condition_k5():
    for D in sample_crt_matrices(5, 10**4, 3):
        assert is_tree_metric(D)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_every_sample_validates(k, seed):
    smp = sample_crt_distances(k, seed)
    smp.validate()
    assert smp.k == k
    # each leaf is at distance t_{k-1} in total length budget: diameter <= total length
    assert smp.distances.max() <= smp.cut_times[-1] + 1e-12


def test_tree_metric_rejects_non_tree():
    # the 4-cycle with unit edges is a metric but not a tree metric
    C4 = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]], float)
    assert not is_tree_metric(C4)
    assert not is_tree_metric(np.array([[0, 5, 1], [5, 0, 1], [1, 1, 0]], float))


def test_rayleigh_survival():
    assert rayleigh_survival(0) == 1
    assert abs(rayleigh_survival(1) - 0.6065306597126334) < 1e-15
    xs = np.linspace(0, 10, 200)
    s = rayleigh_survival(xs)
    assert (np.diff(s) < 0).all() and s[-1] < 1e-20
    with pytest.raises(ValueError):
        rayleigh_survival(-1)


def test_ks_examples():
    assert ks_statistic([math.sqrt(2 * math.log(2))], rayleigh_survival) == pytest.approx(0.5)
    x = stats.rayleigh.rvs(size=10**5, random_state=np.random.default_rng(4))
    assert ks_statistic(x, rayleigh_survival) < 1.63 / math.sqrt(10**5)
    assert ks_statistic(x + 50, rayleigh_survival) > 0.99
    assert abs(ks_statistic(x, rayleigh_survival) -
               stats.kstest(x, stats.rayleigh.cdf).statistic) < 1e-12
    with pytest.raises(ValueError):
        ks_statistic([], rayleigh_survival)


def test_rayleigh_fit_matches_scipy():
    x = stats.rayleigh.rvs(scale=3.0, size=5000, random_state=np.random.default_rng(5))
    _, scale = stats.rayleigh.fit(x, floc=0)
    assert abs(rayleigh_fit(x) - scale) < 1e-6
    D, s = ks_rayleigh(x)
    assert s == rayleigh_fit(x) and D < 0.03


def test_single_and_batch_are_deterministic():
    a = sample_crt_matrices(4, 10, 6)
    b = sample_crt_matrices(4, 10, 6)
    assert np.array_equal(a, b)
    assert isinstance(sample_crt_distances(4, 6), CrtSample)
