import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from lerwlab.lattice import CapExceeded
from lerwlab.oracles import (chi2_sf, chi_square_uniformity, empirical_pmf,
                             enumerate_spanning_trees, exact_path_length_distribution,
                             gamma_q, laplacian, local_cutpoints_naive, loop_erase_literal,
                             matrix_tree_count, total_variation_pmf, tree_path)
from lerwlab.wilson import WeightedGraph

from naive import bfs_path_vertices, cutpoints, retained_by_max, spanning_trees_bruteforce


def test_counts():
    assert matrix_tree_count(WeightedGraph.complete_explicit(3)) == 3
    assert matrix_tree_count(WeightedGraph.complete_explicit(4)) == 16
    assert matrix_tree_count(WeightedGraph.cycle(4)) == 4
    assert matrix_tree_count(WeightedGraph.path_graph(7)) == 1
    assert matrix_tree_count(WeightedGraph.from_edges(4, [(0, 1), (2, 3)])) == 0


@pytest.mark.parametrize("m", [3, 5, 7, 10])
def test_cayley(m):
    assert matrix_tree_count(WeightedGraph.complete_explicit(m)) == m ** (m - 2)


def test_float_path_for_large_graph():
    g = WeightedGraph.grid(4, 5)
    exact = int(round(matrix_tree_count(g)))
    # independent count: determinant of the reduced Laplacian by numpy
    assert exact == int(round(np.linalg.det(laplacian(g)[1:, 1:])))


def test_weighted_count():
    g = WeightedGraph.from_edges(3, [(0, 1, 2), (1, 2, 3), (0, 2, 5)])
    assert matrix_tree_count(g) == 2 * 3 + 3 * 5 + 2 * 5


def test_enumeration():
    assert enumerate_spanning_trees(WeightedGraph.path_graph(5)).count == 1
    e = enumerate_spanning_trees(WeightedGraph.complete_explicit(3))
    assert sorted(e.trees) == [((0, 1), (0, 2)), ((0, 1), (1, 2)), ((0, 2), (1, 2))]
    g = WeightedGraph.grid(2, 3)
    assert enumerate_spanning_trees(g).count == matrix_tree_count(g) == 15
    with pytest.raises(CapExceeded):
        enumerate_spanning_trees(WeightedGraph.complete_explicit(6), cap=100)


@pytest.mark.parametrize("g", [WeightedGraph.grid(3, 3), WeightedGraph.cycle(6),
                               WeightedGraph.complete_explicit(5)])
def test_enumeration_matches_bruteforce(g):
    e = enumerate_spanning_trees(g)
    brute = spanning_trees_bruteforce(g.nverts, [(a, b) for a, b, _ in g.edges()])
    assert sorted(e.trees) == sorted(brute)
    assert e.count == matrix_tree_count(g)


def test_path_length_distribution():
    e = enumerate_spanning_trees(WeightedGraph.complete_explicit(3))
    assert exact_path_length_distribution(e, 1, 1) == {1: 1.0}
    pmf = exact_path_length_distribution(e, 0, 2)
    assert pmf == pytest.approx({2: 2 / 3, 3: 1 / 3}, abs=1e-15)
    g = WeightedGraph.grid(3, 3)
    pmf = exact_path_length_distribution(enumerate_spanning_trees(g), 0, 8)
    assert abs(sum(pmf.values()) - 1) < 1e-12
    with pytest.raises(ValueError):
        exact_path_length_distribution(e, 0, 5)


def test_tree_path_matches_bfs():
    e = enumerate_spanning_trees(WeightedGraph.grid(3, 3))
    for t in e.trees[::50]:
        assert len(tree_path(t, 9, 0, 8)) == bfs_path_vertices(t, 0, 8)


def test_chi_square_examples():
    stat, p = chi_square_uniformity([10, 10, 10, 10])
    assert stat == 0 and p == 1
    stat, p = chi_square_uniformity([100, 0, 0, 0])
    assert stat == 300
    for bad in ([], [3], [0, 0]):
        with pytest.raises(ValueError):
            chi_square_uniformity(bad)


@given(st.floats(0.1, 200), st.integers(1, 60))
@settings(max_examples=200, deadline=None)
def test_chi2_sf_matches_scipy(x, dof):
    assert abs(chi2_sf(x, dof) - stats.chi2.sf(x, dof)) < 1e-10


def test_gamma_q_edges():
    assert gamma_q(2.0, 0.0) == 1.0
    assert abs(gamma_q(1.0, 3.0) - math.exp(-3)) < 1e-14


def test_chi_square_p_values_are_uniform():
    rng = np.random.default_rng(7)
    counts = rng.multinomial(200, [0.2] * 5, size=10**4)
    ps = np.array([chi_square_uniformity(c)[1] for c in counts])
    # discrete counts make the p-value law slightly lumpy; still close to uniform
    D = stats.kstest(ps, "uniform").statistic
    assert D < 0.02


def test_pmf_helpers():
    assert empirical_pmf([1, 1, 2, 4]) == {1: 0.5, 2: 0.25, 4: 0.25}
    assert total_variation_pmf({1: 0.5, 2: 0.5}, {2: 0.5, 3: 0.5}) == 0.5


@given(st.lists(st.integers(0, 5), min_size=1, max_size=50))
@settings(max_examples=200, deadline=None)
def test_literal_erasure(p):
    assert loop_erase_literal(np.array(p)).tolist() == retained_by_max(p)


@given(st.lists(st.integers(0, 8), min_size=3, max_size=50), st.integers(1, 5))
@settings(max_examples=100, deadline=None)
def test_naive_cutpoints(p, k):
    if len(p) > 2 * k:
        assert local_cutpoints_naive(p, k) == cutpoints(p, k)
