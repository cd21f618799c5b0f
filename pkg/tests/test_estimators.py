import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lerwlab.estimators import (Estimate, alpha_from_kill, calibrate, couplelem_bound,
                                estimate_capacity, estimate_closeness, estimate_intersection,
                                estimate_nonintersection, estimate_return, exact_capacity,
                                geometric_tail, lerw_length_stats, lerw_lengths, m_from_a,
                                maximal_coupling, product_bernoulli_pmf, total_variation)
from lerwlab.lattice import WalkConfig
from lerwlab.rng import substream

from naive import transition_matrix


def within(est, exact, z=4):
    sd = est.stderr if est.stderr > 0 else math.sqrt(exact * (1 - exact) / est.trials)
    return abs(est.value - exact) <= z * sd + 1e-15


def test_capacity_trivial_sets():
    cfg = WalkConfig(5)
    assert estimate_capacity([], 10, cfg, 100, 1).value == 0
    assert estimate_capacity(range(cfg.size), 0, cfg, 100, 1).value == 1
    e = estimate_capacity([0], 0, WalkConfig(8), 100000, 3)
    assert within(e, 1 / 4096)
    with pytest.raises(ValueError):
        estimate_capacity([cfg.size], 1, cfg, 10, 1)


def test_capacity_matches_dynamic_programming():
    cfg = WalkConfig(4, 2)
    U = [0, 5]
    exact = exact_capacity(U, 6, cfg)
    assert within(estimate_capacity(U, 6, cfg, 50000, 4), exact)


def test_exact_capacity_matches_matrix_oracle():
    n, d, M = 3, 2, 4
    cfg = WalkConfig(n, d)
    P = transition_matrix(n, d, 0.5)
    U = [1, 7]
    h = np.zeros(n**d)
    h[U] = 1
    for _ in range(M):
        h = np.where(h == 1, 1.0, P @ h) if False else np.maximum(np.isin(np.arange(n**d), U), P @ h)
    assert abs(exact_capacity(U, M, cfg) - h.mean()) < 1e-12


def test_closeness_identities():
    cfg = WalkConfig(5, 3)
    U, V = [0, 1, 2], [30, 60]
    assert estimate_closeness(U, [], 20, cfg, 500, 5).value == 0
    assert estimate_closeness(U, U, 20, cfg, 2000, 5).value == estimate_capacity(U, 20, cfg, 2000, 5).value
    assert estimate_closeness(U, V, 20, cfg, 2000, 5).value == estimate_closeness(V, U, 20, cfg, 2000, 5).value


def test_closeness_and_capacity_orderings():
    cfg = WalkConfig(5, 3)
    U, V = [0, 1, 2], [30, 60]
    c = estimate_closeness(U, V, 30, cfg, 4000, 6)
    cu = estimate_capacity(U, 30, cfg, 4000, 6)
    cv = estimate_capacity(V, 30, cfg, 4000, 6)
    assert 0 <= c.value <= 1
    # on shared streams these are exact couplings
    assert c.value <= min(cu.value, cv.value)
    assert estimate_capacity(U + V, 30, cfg, 4000, 6).value >= cu.value
    assert estimate_capacity(U, 60, cfg, 4000, 6).value >= cu.value


def test_intersection_examples():
    cfg = WalkConfig(5)
    e = estimate_intersection(0, 0, cfg, 200000, 7)
    assert within(e, 1 / 625)
    a = estimate_intersection(10, 10, cfg, 5000, 8)
    b = estimate_intersection(20, 10, cfg, 5000, 8)
    assert b.value >= a.value - 3 * math.hypot(a.stderr, b.stderr)


def test_intersection_grows_quadratically():
    n = 12
    cfg = WalkConfig(n)
    Ls = np.array([n * n, 2 * n * n, 4 * n * n])
    est = np.array([estimate_intersection(L, L, cfg, 20000, 9).value for L in Ls])
    raw = np.polyfit(np.log(Ls), np.log(est), 1)[0]
    # at 4n^2 the probability is near 0.7, so the raw fit is flattened by
    # saturation; -log(1 - p) undoes that for a Poisson-like hit count
    hazard = np.polyfit(np.log(Ls), np.log(-np.log1p(-est)), 1)[0]
    first = np.log(est[1] / est[0]) / np.log(2)
    print(f"intersection {est.tolist()}: raw slope {raw:.3f}, "
          f"first pair {first:.3f}, -log(1-p) slope {hazard:.3f}")
    assert abs(first - 2) <= 0.3
    assert abs(hazard - 2) <= 0.3


def test_nonintersection_examples():
    assert estimate_nonintersection(0, WalkConfig(5), 10, 1).value == 1
    step = {0: 0.5, 1: 0.25, -1: 0.25}
    exact = sum(step[a] * step[b] for a, b in itertools.product(step, step) if a != b)
    e = estimate_nonintersection(1, WalkConfig(5, 1), 100000, 10)
    assert abs(exact - 5 / 8) < 1e-15
    assert within(e, exact)


def test_nonintersection_ratio_report():
    for n in (8, 12):
        cfg = WalkConfig(n)
        from lerwlab.spectral import SpectralKernel, mixing_time
        tau = mixing_time(SpectralKernel(n))
        a = estimate_nonintersection(2 * tau, cfg, 4000, 11)
        b = estimate_nonintersection(n, cfg, 4000, 11)
        print(f"n={n}: f(2 tau)/f(n) = {a.value / b.value:.4f} (limit 0.7071)")
        assert 0 < a.value <= b.value + 3 * math.hypot(a.stderr, b.stderr)


def test_return_probabilities_match_spectral():
    from lerwlab.spectral import SpectralKernel, transition_probability

    cfg = WalkConfig(5)
    k = SpectralKernel(5)
    for e in estimate_return([1, 2, 6], cfg, 200000, 12):
        assert within(e, transition_probability(e.params["t"], 0, k))


def test_lerw_length_bounds():
    cfg = WalkConfig(6)
    assert (lerw_lengths(0, cfg, 20, 1) == 1).all()
    x = lerw_lengths(300, cfg, 200, 2)
    assert (x >= 1).all() and (x <= 301).all()
    y = lerw_lengths(300, WalkConfig(6, 4, 0.0), 200, 2, lattice=True)
    assert (y <= 301).all()
    st_ = lerw_length_stats(300, cfg, 200, 2)
    assert abs(st_.c_hat - st_.mean * math.log(300) ** (1 / 3) / 300) < 1e-12


def test_alpha_and_m_formulas():
    assert abs(alpha_from_kill(0.5, 1, 4) - 1) < 1e-15
    assert m_from_a(0.5, math.exp(11)) == math.floor(2 * 11 ** (2 / 11))


def test_calibration_residual_and_stability():
    a = calibrate(8, 0.1, 1.0, 40, 1, r=40, w=8, m=20)
    b = calibrate(8, 0.1, 1.0, 40, 2, r=40, w=8, m=20)
    for c in (a, b):
        assert c.alpha_residual() < 1e-12
        assert 0 < c.gamma_n < math.inf
    # gamma = b_n sqrt(m) (log n)^(-1/11) once m is fixed
    scale = math.sqrt(20) * math.log(8) ** (-1 / 11)
    assert abs(a.gamma_n - a.b_n * scale) < 1e-9
    assert abs(a.gamma_n - b.gamma_n) <= 3 * scale * math.hypot(a.b_stderr, b.b_stderr)
    with pytest.raises(ValueError):
        calibrate(8, 0.1, 1.0, 5, 1, r=10, w=5)


def test_geometric_tail():
    assert geometric_tail(1, 3) == 0
    assert abs(geometric_tail(0.5, 1) - sum(k * 2.0**-k for k in range(2, 200))) < 1e-14
    p, m = 0.3, 4
    series = sum(k * p * (1 - p) ** (k - 1) for k in range(m + 1, 400))
    assert abs(geometric_tail(p, m) - series) < 1e-12
    for bad in ((0, 2), (1.5, 2), (0.5, 0)):
        with pytest.raises(ValueError):
            geometric_tail(*bad)


def test_coupling_examples():
    assert maximal_coupling([0.3, 0.7], [0.3, 0.7]).disagreement == 0
    assert maximal_coupling([1, 0], [0, 1]).disagreement == 1
    with pytest.raises(ValueError):
        maximal_coupling([0.5, 0.6], [0.5, 0.5])


@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=80, deadline=None)
def test_coupling_marginals_and_tv(k, seed):
    rng = np.random.default_rng(seed)
    p = rng.random(k)
    q = rng.random(k)
    p /= p.sum()
    q /= q.sum()
    c = maximal_coupling(p, q)
    t = c.table()
    assert np.allclose(t.sum(axis=1), p, atol=1e-9)
    assert np.allclose(t.sum(axis=0), q, atol=1e-9)
    assert abs(c.disagreement - total_variation(p, q)) < 1e-9
    assert abs(1 - np.trace(t) - c.disagreement) < 1e-9


def test_coupling_sampler():
    p = np.array([0.2, 0.5, 0.3])
    q = np.array([0.4, 0.4, 0.2])
    c = maximal_coupling(p, q)
    s = c.sample(200000, substream(13))
    off = np.mean(s[:, 0] != s[:, 1])
    assert abs(off - 0.2) <= 4 * math.sqrt(0.16 / 200000)
    assert np.allclose(np.bincount(s[:, 0], minlength=3) / 200000, p, atol=0.005)


def test_couplelem_bound_on_product_bernoulli():
    rng = substream(14)
    for _ in range(100):
        a, b = rng.random(3), rng.random(3)
        p, q = product_bernoulli_pmf(a), product_bernoulli_pmf(b)
        assert abs(p.sum() - 1) < 1e-12
        c = maximal_coupling(p, q)
        # TV by direct enumeration of the 8 outcomes
        tv = 0.5 * sum(abs(math.prod(a[i] if o >> i & 1 else 1 - a[i] for i in range(3))
                           - math.prod(b[i] if o >> i & 1 else 1 - b[i] for i in range(3)))
                       for o in range(8))
        assert abs(c.disagreement - tv) < 1e-12
        assert c.disagreement <= couplelem_bound(a, np.outer(a, a), b, np.outer(b, b)) + 1e-12


def test_estimate_validation():
    with pytest.raises(ValueError):
        Estimate(0.5, -1.0, 3)
    with pytest.raises(ValueError):
        estimate_capacity([0], 1, WalkConfig(5), 0, 1)
