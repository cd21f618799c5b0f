import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lerwlab.lattice import WalkConfig, simulate_walk
from lerwlab.segments import (SurvivorState, classify_good, cutpoint_times, decompose,
                              indicator_matrix, intersection_indicators, make_plan,
                              paper_lengths, pathprop_violations, segment_labels,
                              split_segments, survivors)

from naive import cutpoints, loop_erase_chrono, survivors_from_scratch


def plan(*a, **k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_plan(*a, **k)


def test_window_arithmetic():
    assert plan(3, 4, 1, 1).ell == 1
    p = plan(10, 4, 1, 1)
    assert p.ell == 3
    assert p.window(2) == (4, 7)
    assert p.interior(2) == (5, 6)
    assert p.window(3) == (8, 10)
    assert p.margin_mask(2).tolist() == [True, False, False, True]
    with pytest.raises(IndexError):
        p.window(4)


def test_plan_validation():
    with pytest.raises(ValueError):
        make_plan(10, 4, 2, 1)
    with pytest.raises(ValueError):
        make_plan(10, 40, 2, 2, faithful=True)
    with pytest.warns(UserWarning):
        make_plan(10, 40, 2, 2)


def test_paper_lengths_natural_log():
    r, w = paper_lengths(16, 0.04)
    assert r == math.floor(256 * math.log(16) ** (9 / 22))
    assert w == math.floor(256 * math.log(16) ** 0.04)


def test_self_avoiding_walk_is_good():
    x = np.arange(41)
    rep = classify_good(x, plan(40, 10, 2, 1))
    assert rep.is_good and rep.validate(x, plan(40, 10, 2, 1))


def test_planted_long_loop_sets_b2():
    p = plan(40, 10, 2, 3)
    x = np.arange(41)
    x[18] = x[12]  # loop of length 6 = 2 tau inside segments 2-3
    rep = classify_good(x, p)
    assert rep.flags["B2"] is not None
    j, s, t = rep.flags["B2"]
    assert x[s] == x[t] and t - s >= 6
    assert rep.validate(x, p)


def test_planted_far_hits():
    p = plan(49, 10, 2, 1)
    x = np.arange(50)
    x[35] = x[5]   # segment 4 meets segment 1 in its interior
    x[45] = x[5]   # segment 5 (last) meets segment 1, at a margin time
    rep = classify_good(x, p)
    assert rep.flags["B5"] is not None and rep.flags["B3"] is not None
    assert rep.validate(x, p)


def test_cutpoint_times_clip_windows():
    x = np.array([0, 1, 2, 1, 3, 4])
    got = cutpoint_times(x, 2).tolist()
    # clipped windows: the naive rule on a padded path
    padded = [-2, -3] + x.tolist() + [-4, -5]
    assert got == [u - 2 for u in cutpoints(padded, 2)]


def test_flags_on_random_walks_have_valid_witnesses():
    cfg = WalkConfig(5, 2, 0.0)
    p = plan(120, 20, 4, 1)
    for s in range(40):
        x = simulate_walk(0, 120, cfg, (1, s))
        assert classify_good(x, p).validate(x, p)


def test_indicator_examples():
    segs = [np.array([0, 1]), np.array([2, 3]), np.array([4, 5])]
    assert not indicator_matrix(segs).any()
    segs[2] = np.array([4, 1])
    I = indicator_matrix(segs)
    assert I[1, 3] == 1 and I.sum() == 1
    # adjacent pairs never count
    segs = [np.array([0, 1]), np.array([1, 2])]
    assert not indicator_matrix(segs).any()


def test_indicators_match_double_loop():
    cfg = WalkConfig(5, 2)
    for s in range(30):
        x = simulate_walk(0, 29, cfg, (2, s)).steps
        p = plan(29, 10, 2, 1)
        segs = split_segments(x, p)
        I = intersection_indicators(segs).I
        for i in range(1, 4):
            le = loop_erase_chrono(segs[i - 1])
            for j in range(i + 1, 4):
                expect = int(j != i + 1 and any(v in le for v in segs[j - 1].tolist()))
                assert I[i, j] == expect


def test_survivor_examples():
    I = np.zeros((5, 5), dtype=np.int8)
    st0 = survivors(SurvivorState(I), 4)
    assert st0.final == {0, 1, 2, 3} and st0.J == {4}
    I[1, 3] = 1
    st1 = survivors(SurvivorState(I), 4)
    assert st1.S[3] == {0, 3}
    assert st1.J == {1, 3, 4}


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_survivors_match_recomputation(ell, seed):
    rng = np.random.default_rng(seed)
    I = np.triu(rng.random((ell + 1, ell + 1)) < 0.3, 2).astype(np.int8)
    I[0] = 0
    state = survivors(SurvivorState(I), ell)
    assert state.S == survivors_from_scratch(I, ell - 1)
    tree = survivors(SurvivorState(I), ell, mode="tree")
    assert tree.S == survivors_from_scratch(I, ell)


@given(st.integers(2, 7), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_removing_a_hit_grows_survivors_up_to_its_column(ell, seed):
    rng = np.random.default_rng(seed)
    I = np.triu(rng.random((ell + 1, ell + 1)) < 0.4, 2).astype(np.int8)
    I[0] = 0
    ones = np.argwhere(I)
    if len(ones) == 0:
        return
    a, b = ones[rng.integers(len(ones))]
    J = I.copy()
    J[a, b] = 0
    before = survivors(SurvivorState(I), ell, mode="tree").S
    after = survivors(SurvivorState(J), ell, mode="tree").S
    assert before[:b] == after[:b]
    assert before[b] <= after[b]


def test_removing_a_hit_can_shrink_later_survivors():
    # a survivor kept alive by the removal can knock out later indices
    I = np.zeros((5, 5), dtype=np.int8)
    I[1, 3] = I[2, 4] = 1
    assert survivors(SurvivorState(I), 4, mode="tree").S[4] == {0, 3, 4}
    I[1, 3] = 0
    assert survivors(SurvivorState(I), 4, mode="tree").S[4] == {0, 1, 4}


def test_survivor_mode_errors():
    with pytest.raises(ValueError):
        survivors(SurvivorState(np.zeros((3, 3), dtype=np.int8)), mode="other")


def test_segment_labels_examples():
    p = plan(29, 10, 2, 1)
    N, edges = segment_labels(np.arange(30), p)
    assert N.tolist() == [0, 10, 10, 10]
    assert edges == {(1, 2), (2, 3)}
    x = np.arange(30)
    x[20] = x[9]  # closes a loop over all of segment 2
    N, _ = segment_labels(x, p)
    assert N[2] == 0
    N, _ = segment_labels(np.arange(30), p, exclude_last=True)
    assert N[3] == 9


def test_pathprop_rules():
    N = np.array([0, 5, 0, 9])
    L = np.array([0, 5, 3, 8])
    assert pathprop_violations(N, L, {0, 1}, {3}, 1, 3) == []
    assert pathprop_violations(N, L, {0}, {3}, 1, 3) == [(1, "not S, not J")]
    assert pathprop_violations(np.array([0, 9, 0, 9]), L, {0, 1}, {3}, 1, 3) == [(1, "S-J")]


def test_pathprop_holds_on_good_walks():
    cfg = WalkConfig(16, 4, 0.0)
    p = plan(400, 66, 16, 8)
    good = 0
    for s in range(300):
        dec = decompose(simulate_walk(0, 400, cfg, (3, s)), p)
        if dec.report.is_good:
            good += 1
            assert dec.violations == []
    assert good > 0
