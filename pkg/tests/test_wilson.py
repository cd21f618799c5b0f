import numpy as np
import pytest

from lerwlab.lattice import ROOT, CapExceeded
from lerwlab.oracles import (chi_square_uniformity, empirical_pmf, enumerate_spanning_trees,
                             exact_path_length_distribution, total_variation_pmf)
from lerwlab.rng import substream
from lerwlab.wilson import (INF, SpanningTree, WeightedGraph, collapsed_tree,
                            complete_graph_construction, lerw_between, lerw_lengths_torus,
                            lerw_sizes, partial_tree, tree_distance, tree_keys,
                            tree_path_sizes, wilson_ust, wilson_ust_many)

from naive import bfs_path_vertices, spanning_trees_bruteforce


def test_tree_input_returns_itself():
    g = WeightedGraph.path_graph(6)
    t = wilson_ust(g, stream=1)
    assert t.edges() == tuple((i, i + 1) for i in range(5))


@pytest.mark.parametrize("m", [3, 4])
def test_complete_graph_uniform(m):
    g = WeightedGraph.complete_explicit(m)
    trees = spanning_trees_bruteforce(m, [(a, b) for a, b, _ in g.edges()])
    assert len(trees) == m ** (m - 2)
    idx = {t: i for i, t in enumerate(trees)}
    keys = tree_keys(wilson_ust_many(g, 160000, 4), 0)
    counts = np.bincount([idx[k] for k in keys], minlength=len(trees))
    assert counts.sum() == 160000
    assert chi_square_uniformity(counts)[1] > 1e-3


def test_start_order_invariance():
    g = WeightedGraph.complete_explicit(4)
    enum = enumerate_spanning_trees(g)
    idx = enum.index()
    a = tree_keys(wilson_ust_many(g, 100000, 5), 0)
    b = tree_keys(wilson_ust_many(g, 100000, 6, root=2, start_order=[3, 1, 0]), 2)
    ca = np.bincount([idx[k] for k in a], minlength=16)
    cb = np.bincount([idx[k] for k in b], minlength=16)
    # two-sample chi-square on a 2 x 16 table
    tot = ca + cb
    e = tot / 2
    stat = float((((ca - e) ** 2 + (cb - e) ** 2) / e).sum())
    from lerwlab.oracles import chi2_sf
    assert chi2_sf(stat, 15) > 1e-3


def test_every_sample_is_a_spanning_tree():
    g = WeightedGraph.grid(3, 4)
    for s in range(200):
        t = wilson_ust(g, stream=(7, s))
        assert t.validate()
        assert len(t.edges()) == g.nverts - 1
    for p in wilson_ust_many(g, 500, 8):
        assert SpanningTree(p, 0, g).validate()


def test_single_and_many_agree_in_law():
    g = WeightedGraph.cycle(5)
    idx = enumerate_spanning_trees(g).index()
    one = [idx[wilson_ust(g, stream=(9, s)).edges()] for s in range(5000)]
    assert chi_square_uniformity(np.bincount(one, minlength=5))[1] > 1e-3


def test_pemantle_on_grid():
    g = WeightedGraph.grid(2, 3)
    exact = exact_path_length_distribution(enumerate_spanning_trees(g), 0, 5)
    assert abs(sum(exact.values()) - 1) < 1e-12
    w = tree_path_sizes(wilson_ust_many(g, 100000, 10), 0, 5)
    le = lerw_sizes(g, 0, 5, 100000, 11)
    assert total_variation_pmf(empirical_pmf(w), exact) <= 0.02
    assert total_variation_pmf(empirical_pmf(le), exact) <= 0.02


def test_lerw_between_is_self_avoiding():
    g = WeightedGraph.grid(3, 3)
    for s in range(50):
        p = lerw_between(g, 0, 8, (12, s))
        assert p[0] == 0 and p[-1] == 8 and len(set(p.tolist())) == len(p)


def test_tree_distance_examples():
    g = WeightedGraph.path_graph(3)
    t = wilson_ust(g, stream=0)
    assert tree_distance(t, 1, 1) == 1
    assert tree_distance(t, 0, 2) == 3
    with pytest.raises(ValueError):
        tree_distance(t, 0, 7)


def test_tree_distance_matches_bfs():
    rng = np.random.default_rng(13)
    for s in range(100):
        m = int(rng.integers(2, 51))
        g = WeightedGraph.complete(m)
        t = wilson_ust(g, stream=(13, s))
        edges = t.edges()
        a, b = (int(v) for v in rng.integers(0, m, 2))
        assert tree_distance(t, a, b) == bfs_path_vertices(edges, a, b) if a != b else 1


def test_rooted_distance_through_root_is_infinite():
    parent = {1: 2, 2: ROOT, 3: ROOT}
    assert tree_distance(parent, 1, 3) == INF
    assert tree_distance(parent, 1, 2) == 2


def test_budget_cap():
    g = WeightedGraph.torus(6, kill=1e-9)
    with pytest.raises(CapExceeded):
        wilson_ust(g, stream=1, budget=5)


def test_partial_tree_immediate_root():
    g = WeightedGraph.torus(5, kill=1.0)
    pt = partial_tree(g, [3], 4, 1)
    assert pt.branches[0].tolist() == [3, ROOT]
    assert pt.U == [1]
    with pytest.raises(ValueError):
        partial_tree(g, [ROOT], 4, 1)
    with pytest.raises(ValueError):
        partial_tree(WeightedGraph.torus(5), [0], 4, 1)


def test_partial_tree_second_branch_stops_on_first():
    g = WeightedGraph.torus(5, kill=0.01)
    for s in range(30):
        pt = partial_tree(g, [0, 1], 3, (14, s))
        first = set(pt.branches[0].tolist())
        end = int(pt.branches[1][-1])
        assert end in first
        assert not set(pt.branches[1][:-1].tolist()) & first
        # zeta bookkeeping: zeta_{i+1} = zeta_i + floor(U_i / r) + 1
        for i, u in enumerate(pt.U):
            assert pt.zeta[i + 1] == pt.zeta[i] + u // 3 + 1


def test_partial_tree_first_branch_mean_length():
    n, beta = 8, 0.2
    g = WeightedGraph.torus(n, beta)
    U = [partial_tree(g, [0], 10, (15, s)).U[0] for s in range(3000)]
    bound = beta * n * n * np.sqrt(np.log(n))
    assert np.mean(U) <= bound * (1 + 3 / np.sqrt(len(U)))


def test_collapsed_tree_all_to_root():
    kappa = [1, 3, 6]
    I = np.zeros((6, 6), dtype=np.int8)
    I[0, 2] = I[0, 5] = 1
    tree = collapsed_tree(kappa, I)
    assert tree.is_forest()
    # the segment that hits the root adds no vertex; its predecessor links to 0
    assert tree.edges() == [(0, 1), (0, 4), (3, 4)]
    assert tree.distance(1, 3) == INF


def test_collapsed_tree_loop_case():
    I = np.zeros((4, 4), dtype=np.int8)
    I[1, 3] = 1
    tree = collapsed_tree([1, 4], I)
    assert tree.labels == {0, 3}
    assert tree.node_of[3] == 1
    assert tree.history[-1] == {3}
    again = collapsed_tree([1, 4], I.copy())
    assert again.edges() == tree.edges() and again.history == tree.history


def test_collapsed_tree_errors():
    with pytest.raises(ValueError):
        collapsed_tree([2, 3], np.zeros((3, 3)))
    I = np.zeros((3, 3), dtype=np.int8)
    I[0, 1] = 1
    with pytest.raises(ValueError):
        collapsed_tree([1, 3], I)


def test_complete_graph_construction_matches_partial_tree():
    g = WeightedGraph.complete(20, alpha=0.5)
    for s in range(50):
        pt = partial_tree(g, [0, 1, 2], 1, (16, s))
        tree, v = complete_graph_construction(pt)
        assert tree.is_forest()
        for a in range(1, 4):
            for b in range(a + 1, 4):
                la = tree.label_of_origin(pt.zeta[a - 1])
                lb = tree.label_of_origin(pt.zeta[b - 1])
                if la is None or lb is None:
                    continue
                got = tree.distance(la, lb)
                assert got == pt.distance(a, b)


def test_lerw_lengths_torus_deterministic():
    a = lerw_lengths_torus(5, 100, 17)
    b = lerw_lengths_torus(5, 100, 17)
    assert np.array_equal(a, b) and (a >= 1).all()


def test_multiwalk_root_jump_flags():
    from lerwlab.wilson import classify_multiwalk

    # a jump in the first segment means R_{zeta_1} meets the root: D4
    g = WeightedGraph.torus(5, kill=1.0)
    rep = classify_multiwalk(partial_tree(g, [3], 4, 1), 4, 1, 1)
    assert rep.D == {"D1": None, "D2": None, "D3": None, "D4": (1, 0)}
    # a single branch reaching the root after its first segment: no D flags
    g = WeightedGraph.torus(5, kill=0.05)
    checked = 0
    for s in range(200):
        pt = partial_tree(g, [3], 10, (19, s))
        if 10 <= pt.U[0] < 20:
            rep = classify_multiwalk(pt, 10, 2, 1)
            assert all(v is None for v in rep.D.values())
            checked += 1
    assert checked > 0


def test_multiwalk_theorem_checks_on_G():
    from lerwlab.wilson import classify_multiwalk

    g = WeightedGraph.torus(16, 0.2, laziness=0.0)
    rng = substream(18)
    seen = 0
    for s in range(1500):
        starts = rng.integers(0, g.nverts, 3)
        if len(set(starts.tolist())) < 3:
            continue
        pt = partial_tree(g, starts.tolist(), 66, (18, s))
        rep = classify_multiwalk(pt, 66, 16, 8)
        if rep.G:
            seen += 1
            for key in ("label", "walk", "dist", "inf"):
                assert rep.checks[key] == []
    assert seen > 0
