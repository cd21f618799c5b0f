"""Exact ground truth for small graphs.

Spanning-tree counts from the matrix-tree theorem, full enumeration by
contraction/deletion, exact UST path-length laws, and a chi-square
uniformity test with a self-contained incomplete-gamma p-value.
"""

import math
import warnings
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numba import njit

from .lattice import CapExceeded
from .wilson import WeightedGraph

_EXACT_LIMIT = 16


def _explicit(graph):
    if not isinstance(graph, WeightedGraph) or graph.kind != "explicit":
        raise TypeError("need an explicit WeightedGraph")
    return graph


def laplacian(graph):
    g = _explicit(graph)
    L = np.zeros((g.nverts, g.nverts))
    for u, v, wt in g.edges():
        if u == v:
            continue
        L[u, v] -= wt
        L[v, u] -= wt
        L[u, u] += wt
        L[v, v] += wt
    return L


def _bareiss(M):
    """Exact determinant of an integer matrix (list of lists) by fraction-free elimination."""
    M = [row[:] for row in M]
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def matrix_tree_count(graph):
    """Weighted spanning-tree count: any cofactor of the Laplacian.

    Integer weights on at most 16 vertices give an exact Python int; larger or
    non-integer instances fall back to a floating determinant.
    """
    g = _explicit(graph)
    if g.nverts > 64:
        raise ValueError("matrix_tree_count supports at most 64 vertices")
    if g.nverts == 1:
        return 1
    if not g.is_connected():
        return 0
    L = laplacian(g)[1:, 1:]
    integral = np.all(g.weights == np.round(g.weights))
    if integral and g.nverts <= _EXACT_LIMIT:
        return _bareiss([[int(x) for x in row] for row in L])
    cond = np.linalg.cond(L)
    if cond > 1e12:
        warnings.warn(f"Laplacian cofactor is ill-conditioned (cond={cond:.3g})")
    sign, logdet = np.linalg.slogdet(L)
    return float(sign * math.exp(logdet))


@dataclass
class TreeEnumeration:
    trees: list  # each a sorted tuple of (u, v) pairs with u < v
    count: int
    nverts: int
    weights: list = None  # product of edge weights per tree

    def index(self):
        return {t: i for i, t in enumerate(self.trees)}


class _UnionFind:
    def __init__(self, n):
        self.p = list(range(n))
        self.log = []

    def find(self, a):
        while self.p[a] != a:
            a = self.p[a]
        return a

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        self.p[b] = a
        self.log.append(b)
        return True

    def undo(self):
        b = self.log.pop()
        self.p[b] = b


def _spans(n, uf, edges):
    """Do the current components plus ``edges`` connect everything?"""
    roots = {uf.find(v) for v in range(n)}
    if len(roots) == 1:
        return True
    adj = {r: [] for r in roots}
    for u, v, _ in edges:
        a, b = uf.find(u), uf.find(v)
        if a != b:
            adj[a].append(b)
            adj[b].append(a)
    start = next(iter(roots))
    seen = {start}
    todo = [start]
    while todo:
        a = todo.pop()
        for b in adj[a]:
            if b not in seen:
                seen.add(b)
                todo.append(b)
    return len(seen) == len(roots)


def enumerate_spanning_trees(graph, cap=10**5):
    """All spanning trees, by recursive contraction (take an edge) and deletion (drop it)."""
    g = _explicit(graph)
    expected = matrix_tree_count(g)
    unit = bool(np.all(g.weights == 1.0))
    if unit and expected > cap:
        raise CapExceeded(f"{expected} spanning trees exceed the cap {cap}")
    edges = [e for e in g.edges() if e[0] != e[1]]
    n = g.nverts
    trees, weights = [], []
    uf = _UnionFind(n)
    chosen = []

    def rec(i):
        if len(chosen) == n - 1:
            trees.append(tuple(sorted((u, v) for u, v, _ in chosen)))
            weights.append(math.prod(w for _, _, w in chosen))
            if len(trees) > cap:
                raise CapExceeded(f"more than {cap} spanning trees")
            return
        if i == len(edges):
            return
        u, v, wt = edges[i]
        if uf.union(u, v):
            chosen.append(edges[i])
            rec(i + 1)
            chosen.pop()
            uf.undo()
        if _spans(n, uf, edges[i + 1 :]):
            rec(i + 1)

    if n == 1:
        trees, weights = [()], [1.0]
    elif g.is_connected():
        rec(0)
    if unit and len(trees) != expected:
        raise AssertionError(f"enumerated {len(trees)} trees, matrix-tree count {expected}")
    return TreeEnumeration(trees, len(trees), n, weights)


def tree_path(tree_edges, nverts, x, y):
    """Vertices on the unique x-y path of a tree given as an edge list."""
    adj = [[] for _ in range(nverts)]
    for u, v in tree_edges:
        adj[u].append(v)
        adj[v].append(u)
    prev = {x: None}
    todo = deque([x])
    while todo:
        a = todo.popleft()
        if a == y:
            break
        for b in adj[a]:
            if b not in prev:
                prev[b] = a
                todo.append(b)
    if y not in prev:
        raise ValueError(f"{y} not reachable from {x}")
    out = [y]
    while out[-1] != x:
        out.append(prev[out[-1]])
    return out[::-1]


def exact_path_length_distribution(enumeration, x, y, weighted=False):
    """Law of the number of vertices on the x-y tree path under the UST.

    Trees are equally likely unless ``weighted``, in which case each tree
    counts with the product of its edge weights.
    """
    n = enumeration.nverts
    for v in (x, y):
        if not 0 <= v < n:
            raise ValueError(f"vertex {v} not in graph")
    mass = {}
    for t, wt in zip(enumeration.trees, enumeration.weights):
        k = len(tree_path(t, n, x, y))
        mass[k] = mass.get(k, 0) + (Fraction(wt) if weighted else 1)
    total = sum(mass.values())
    return {k: float(Fraction(v) / total) for k, v in sorted(mass.items())}


# --- chi-square ---------------------------------------------------------------------

def _gamma_series(a, x):
    # P(a, x) by its power series; good for x < a + 1
    term = total = 1.0 / a
    ap = a
    for _ in range(10_000):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # Q(a, x) by a continued fraction (modified Lentz); good for x >= a + 1
    tiny = 1e-300
    b = x + 1 - a
    c = 1 / tiny
    d = 1 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q(a, x):
    """Regularized upper incomplete gamma Q(a, x)."""
    if a <= 0:
        raise ValueError("a must be > 0")
    if x < 0:
        raise ValueError("x must be >= 0")
    if x == 0:
        return 1.0
    if x < a + 1:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def chi2_sf(stat, dof):
    return gamma_q(dof / 2.0, stat / 2.0)


def chi_square_uniformity(counts):
    """Pearson statistic against the uniform law and its chi-square p-value."""
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        raise ValueError("counts list is empty")
    if counts.size < 2:
        raise ValueError("need at least 2 cells")
    if np.any(counts < 0):
        raise ValueError("counts must be >= 0")
    total = counts.sum()
    if total <= 0:
        raise ValueError("total count must be > 0")
    E = total / counts.size
    stat = float(np.sum((counts - E) ** 2) / E)
    return stat, chi2_sf(stat, counts.size - 1)


def total_variation_pmf(p, q):
    """TV distance between two pmfs given as dicts."""
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def empirical_pmf(values):
    vals, cnt = np.unique(np.asarray(values), return_counts=True)
    return {int(v): c / cnt.sum() for v, c in zip(vals, cnt)}


# --- literal loop-erasure definitions ---------------------------------------------------

@njit(cache=True)
def _literal_times(path):
    m = len(path)
    out = np.empty(m, dtype=np.int64)
    k = 0
    i = 0
    while True:
        # sigma = max{t : path[t] = path[i]}
        s = i
        for t in range(m - 1, i - 1, -1):
            if path[t] == path[i]:
                s = t
                break
        out[k] = s
        k += 1
        if s == m - 1:
            return out[:k].copy()
        i = s + 1


def loop_erase_literal(path):
    """Retained times by the inductive definition v_{m+1} = u_{r+1}, r = max{i : u_i = v_m}.

    Quadratic in the path length; kept as the reference for the fast pass.
    """
    path = np.asarray(path, dtype=np.int64)
    if len(path) == 0:
        raise ValueError("cannot erase an empty path")
    return _literal_times(path)


def local_cutpoints_naive(path, k):
    """Times u with {X_(u-k)..X_(u-1)} and {X_(u+1)..X_(u+k)} disjoint, by set intersection."""
    x = [int(v) for v in np.asarray(path).tolist()]
    return [u for u in range(k, len(x) - k)
            if not set(x[u - k : u]) & set(x[u + 1 : u + k + 1])]
