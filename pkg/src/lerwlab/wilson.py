"""Wilson's algorithm, partial trees and the collapsed labeled tree.

Three kinds of graph are supported:

* ``explicit``: a weighted edge list (CSR inside), any vertex may be the root;
* ``complete``: K_m with a self-loop at every vertex, optionally with a root
  reached with probability ``1/(alpha sqrt m)`` per step;
* ``torus``: the lazy walk on Z^d_n, optionally killed to a root.

On the two built-in rooted kinds the root is ``ROOT`` (-1) in the public API
and the slot ``nverts`` inside the kernels.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .lattice import ROOT, CapExceeded, WalkConfig, _move
from .looperase import _erase_dense, retained_times
from .parallel import map_ordered
from .rng import as_generator, chunk_sizes, substream
from . import segments as seg

INF = math.inf
DEFAULT_BUDGET = 10**9


# --- graphs ------------------------------------------------------------------------

@dataclass
class WeightedGraph:
    kind: str
    nverts: int
    rooted: bool = False
    indptr: np.ndarray = None
    indices: np.ndarray = None
    weights: np.ndarray = None
    cfg: WalkConfig = None
    m: int = None
    alpha: float = None
    labels: list = None

    @property
    def size(self):
        """Number of kernel slots (vertices plus root slot if any)."""
        return self.nverts + (1 if self.rooted else 0)

    @property
    def root_prob(self):
        if self.kind == "complete":
            return 1.0 / (self.alpha * math.sqrt(self.m)) if self.rooted else 0.0
        if self.kind == "torus":
            return self.cfg.root_kill_prob
        return 0.0

    def internal(self, v):
        v = int(v)
        if v == ROOT:
            if not self.rooted:
                raise ValueError("graph has no root")
            return self.nverts
        if not 0 <= v < self.nverts:
            raise ValueError(f"vertex {v} not in graph")
        return v

    def external(self, v):
        return ROOT if self.rooted and v == self.nverts else int(v)

    # builders
    @classmethod
    def from_edges(cls, nverts, edges):
        """Undirected weighted graph from ``(u, v, weight)`` triples."""
        nbr = [dict() for _ in range(nverts)]
        for e in edges:
            u, v = int(e[0]), int(e[1])
            wt = float(e[2]) if len(e) > 2 else 1.0
            if wt < 0:
                raise ValueError("negative edge weight")
            if not (0 <= u < nverts and 0 <= v < nverts):
                raise ValueError(f"edge ({u}, {v}) out of range")
            nbr[u][v] = nbr[u].get(v, 0.0) + wt
            if u != v:
                nbr[v][u] = nbr[v].get(u, 0.0) + wt
        indptr = np.zeros(nverts + 1, dtype=np.int64)
        for u in range(nverts):
            indptr[u + 1] = indptr[u] + len(nbr[u])
        indices = np.empty(indptr[-1], dtype=np.int64)
        weights = np.empty(indptr[-1])
        for u in range(nverts):
            items = sorted(nbr[u].items())
            indices[indptr[u] : indptr[u + 1]] = [a for a, _ in items]
            weights[indptr[u] : indptr[u + 1]] = [b for _, b in items]
        return cls("explicit", nverts, indptr=indptr, indices=indices, weights=weights)

    @classmethod
    def complete(cls, m, alpha=None):
        if m < 1:
            raise ValueError("m must be >= 1")
        if alpha is not None and alpha * math.sqrt(m) <= 1:
            raise ValueError("need alpha > 1/sqrt(m) for a positive root weight")
        return cls("complete", int(m), rooted=alpha is not None, m=int(m), alpha=alpha)

    @classmethod
    def torus(cls, n, beta=None, *, d=4, laziness=0.5, kill=None):
        if beta is not None:
            kill = torus_kill(n, beta)
        cfg = WalkConfig(n, d, laziness, kill or 0.0)
        return cls("torus", n**d, rooted=cfg.root_kill_prob > 0, cfg=cfg)

    @classmethod
    def grid(cls, rows, cols):
        edges = []
        for i in range(rows):
            for j in range(cols):
                v = i * cols + j
                if j + 1 < cols:
                    edges.append((v, v + 1, 1.0))
                if i + 1 < rows:
                    edges.append((v, v + cols, 1.0))
        return cls.from_edges(rows * cols, edges)

    @classmethod
    def complete_explicit(cls, m):
        return cls.from_edges(m, [(i, j, 1.0) for i in range(m) for j in range(i + 1, m)])

    @classmethod
    def cycle(cls, m):
        return cls.from_edges(m, [(i, (i + 1) % m, 1.0) for i in range(m)])

    @classmethod
    def path_graph(cls, m):
        return cls.from_edges(m, [(i, i + 1, 1.0) for i in range(m - 1)])

    @classmethod
    def read_edge_list(cls, fname):
        """``u v weight`` per line; ``#`` starts a comment; labels may be any tokens."""
        names, edges = {}, []
        with open(fname) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) not in (2, 3):
                    raise ValueError(f"{fname}:{lineno}: expected 'u v [weight]'")
                u, v = (names.setdefault(p, len(names)) for p in parts[:2])
                edges.append((u, v, float(parts[2]) if len(parts) == 3 else 1.0))
        g = cls.from_edges(len(names), edges)
        g.labels = sorted(names, key=names.get)
        return g

    def edges(self):
        """Undirected (u, v, weight) triples with u <= v (explicit graphs)."""
        self._need_explicit()
        out = []
        for u in range(self.nverts):
            for k in range(self.indptr[u], self.indptr[u + 1]):
                v = int(self.indices[k])
                if u <= v:
                    out.append((u, v, float(self.weights[k])))
        return out

    def cumulative(self):
        self._need_explicit()
        cum = np.empty_like(self.weights)
        for u in range(self.nverts):
            a, b = self.indptr[u], self.indptr[u + 1]
            wts = self.weights[a:b]
            tot = wts.sum()
            if tot <= 0:
                raise ValueError(f"vertex {u} has no positive-weight edge")
            cum[a:b] = np.cumsum(wts) / tot
            cum[b - 1] = 1.0
        return cum

    def is_connected(self):
        self._need_explicit()
        seen = np.zeros(self.nverts, dtype=bool)
        seen[0] = True
        todo = [0]
        while todo:
            u = todo.pop()
            for k in range(self.indptr[u], self.indptr[u + 1]):
                v = self.indices[k]
                if self.weights[k] > 0 and not seen[v]:
                    seen[v] = True
                    todo.append(v)
        return bool(seen.all())

    def _need_explicit(self):
        if self.kind != "explicit":
            raise TypeError("operation needs an explicit graph")


def torus_kill(n, beta):
    """Per-step root probability 1 / (beta n^2 sqrt(log n))."""
    return 1.0 / (beta * n * n * math.sqrt(math.log(n)))


# --- kernels -------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _csr_step(u, indptr, indices, cum, x):
    a, b = indptr[u], indptr[u + 1]
    k = a + np.searchsorted(cum[a:b], x, side="right")
    if k >= b:
        k = b - 1
    return indices[k]


@njit(cache=True, nogil=True)
def _complete_step(u, m, pk, x):
    if x < pk:
        return m
    y = int((x - pk) / (1.0 - pk) * m)
    return y if y < m else m - 1


@njit(cache=True, nogil=True)
def _torus_step(u, n, d, laz, kill, root, x):
    if x < kill:
        return root
    if kill > 0.0:
        x = (x - kill) / (1.0 - kill)
    return _move(u, x, laz, n, d)


@njit(cache=True, nogil=True)
def _wilson_core(kind, size, root, order, budget, rng, indptr, indices, cum,
                 m, pk, n, d, laz, kill):
    in_tree = np.zeros(size, dtype=np.bool_)
    nxt = np.full(size, -1, dtype=np.int64)
    in_tree[root] = True
    nxt[root] = root
    for s in order:
        u = s
        steps = 0
        while not in_tree[u]:
            x = rng.random()
            if kind == 0:
                v = _csr_step(u, indptr, indices, cum, x)
            elif kind == 1:
                v = _complete_step(u, m, pk, x)
            else:
                v = _torus_step(u, n, d, laz, kill, size - 1, x)
            nxt[u] = v
            u = v
            steps += 1
            if steps > budget:
                return nxt, False
        u = s
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u]
    return nxt, True


@njit(cache=True, nogil=True)
def _walk_to_target(kind, start, in_target, budget, rng, indptr, indices, cum,
                    m, pk, n, d, laz, kill):
    """Full path of a walk run until it enters ``in_target`` (kernel slots)."""
    buf = np.empty(64, dtype=np.int64)
    buf[0] = start
    u = start
    t = 0
    size = len(in_target)
    while not in_target[u]:
        x = rng.random()
        if kind == 0:
            u = _csr_step(u, indptr, indices, cum, x)
        elif kind == 1:
            u = _complete_step(u, m, pk, x)
        else:
            u = _torus_step(u, n, d, laz, kill, size - 1, x)
        t += 1
        if t >= len(buf):
            nb = np.empty(2 * len(buf), dtype=np.int64)
            nb[: len(buf)] = buf
            buf = nb
        buf[t] = u
        if t >= budget:
            return buf[: t + 1].copy(), False
    return buf[: t + 1].copy(), True


@njit(cache=True, nogil=True)
def _wilson_many(count, kind, size, root, order, budget, rng, indptr, indices, cum,
                 m, pk, n, d, laz, kill):
    out = np.empty((count, size), dtype=np.int64)
    for i in range(count):
        nxt, ok = _wilson_core(kind, size, root, order, budget, rng, indptr, indices,
                               cum, m, pk, n, d, laz, kill)
        if not ok:
            return out[:i], False
        out[i] = nxt
    return out, True


@njit(cache=True, nogil=True)
def _lerw_sizes(count, kind, start, in_target, budget, rng, indptr, indices, cum,
                m, pk, n, d, laz, kill):
    out = np.empty(count, dtype=np.int64)
    nverts = len(in_target) - 1
    for i in range(count):
        path, ok = _walk_to_target(kind, start, in_target, budget, rng, indptr,
                                   indices, cum, m, pk, n, d, laz, kill)
        if not ok:
            return out[:i], False
        out[i] = len(_erase_dense(path, nverts))
    return out, True


@njit(cache=True, nogil=True)
def _tree_path_sizes(parents, x, y):
    """Vertices on the x-y path of each parent-map tree (one tree per row)."""
    count, size = parents.shape
    out = np.empty(count, dtype=np.int64)
    mark = np.full(size, -1, dtype=np.int64)
    for i in range(count):
        p = parents[i]
        u = x
        k = 0
        while True:
            mark[u] = k
            if p[u] == u:
                break
            u = p[u]
            k += 1
        u = y
        k = 0
        while mark[u] < 0:
            u = p[u]
            k += 1
        out[i] = mark[u] + k + 1
        u = x
        while True:
            mark[u] = -1
            if p[u] == u:
                break
            u = p[u]
    return out


def _kernel_args(graph):
    e = np.zeros(1, dtype=np.int64)
    f = np.zeros(1)
    if graph.kind == "explicit":
        return (0, graph.indptr, graph.indices, graph.cumulative(), 0, 0.0, 0, 0, 0.0, 0.0)
    if graph.kind == "complete":
        return (1, e, e, f, graph.m, graph.root_prob, 0, 0, 0.0, 0.0)
    c = graph.cfg
    return (2, e, e, f, 0, 0.0, c.n, c.d, c.laziness, c.root_kill_prob)


# --- spanning trees ----------------------------------------------------------------------

@dataclass
class SpanningTree:
    parent: np.ndarray
    root: int
    graph: WeightedGraph = None

    def edges(self):
        """Canonical sorted edge list (kernel slots)."""
        out = [(min(v, p), max(v, p)) for v, p in enumerate(self.parent) if v != self.root]
        return tuple(sorted((int(a), int(b)) for a, b in out))

    def depth(self):
        dep = np.full(len(self.parent), -1, dtype=np.int64)
        dep[self.root] = 0
        for v in range(len(self.parent)):
            chain = []
            u = v
            while dep[u] < 0:
                chain.append(u)
                u = self.parent[u]
                if len(chain) > len(self.parent):
                    raise ValueError("parent map has a cycle")
            for x in reversed(chain):
                dep[x] = dep[self.parent[x]] + 1
        return dep

    def validate(self):
        """Raise unless this is a spanning tree whose edges exist in the graph."""
        if self.parent[self.root] != self.root:
            raise ValueError("root must be its own parent")
        if (self.parent < 0).any():
            raise ValueError("some vertex was never reached")
        self.depth()
        g = self.graph
        if g is not None and g.kind == "explicit":
            for v, p in enumerate(self.parent):
                if v == self.root:
                    continue
                nb = g.indices[g.indptr[v] : g.indptr[v + 1]]
                if p not in nb:
                    raise ValueError(f"edge ({v}, {p}) not in graph")
        return True


def _order(graph, root, start_order):
    size = graph.size
    seen = np.zeros(size, dtype=bool)
    out = []
    for v in start_order or []:
        v = graph.internal(v)
        if not seen[v]:
            seen[v] = True
            out.append(v)
    out.extend(int(v) for v in np.flatnonzero(~seen))
    return np.array([v for v in out if v != root], dtype=np.int64)


def wilson_ust(graph, root=None, start_order=None, stream=0, budget=DEFAULT_BUDGET):
    """Uniform (weighted) spanning tree by Wilson's algorithm."""
    if root is None:
        root = ROOT if graph.rooted else 0
    r = graph.internal(root)
    if graph.kind == "explicit" and not graph.is_connected():
        raise ValueError("graph is disconnected")
    rng = as_generator(stream, "wilson")
    order = _order(graph, r, start_order)
    kind, ip, ix, cum, m, pk, n, d, laz, kill = _kernel_args(graph)
    if kind == 1 and not graph.rooted and r == graph.nverts:
        raise ValueError("graph has no root")
    nxt, ok = _wilson_core(kind, graph.size, r, order, int(budget), rng, ip, ix, cum,
                           m, pk, n, d, laz, kill)
    if not ok:
        raise CapExceeded(f"a branch used more than {budget} steps")
    return SpanningTree(nxt, r, graph)


def wilson_ust_many(graph, count, stream, root=None, start_order=None,
                    budget=DEFAULT_BUDGET):
    """``count`` independent Wilson trees as a (count, size) parent array.

    Trees are drawn chunk by chunk from keyed substreams.
    """
    if root is None:
        root = ROOT if graph.rooted else 0
    r = graph.internal(root)
    if graph.kind == "explicit" and not graph.is_connected():
        raise ValueError("graph is disconnected")
    order = _order(graph, r, start_order)
    args = _kernel_args(graph)

    def run(job):
        c, size = job
        rng = substream(stream, "wilson-many", c)
        out, ok = _wilson_many(size, args[0], graph.size, r, order, int(budget), rng,
                               *args[1:])
        if not ok:
            raise CapExceeded(f"a branch used more than {budget} steps")
        return out

    return np.concatenate(map_ordered(run, enumerate(chunk_sizes(count))))


def tree_path_sizes(parents, x, y):
    """Vertex counts of the x-y paths in a stack of parent maps."""
    return _tree_path_sizes(np.ascontiguousarray(parents, dtype=np.int64), int(x), int(y))


def tree_keys(parents, root):
    """Canonical sorted edge tuples for each row of a parent-map stack."""
    out = []
    for p in np.asarray(parents):
        out.append(tuple(sorted((int(min(v, q)), int(max(v, q)))
                                for v, q in enumerate(p) if v != root)))
    return out


def lerw_sizes(graph, x, y, count, stream, budget=DEFAULT_BUDGET):
    """Vertex counts of ``count`` independent loop-erased walks from x to y."""
    mask = np.zeros(graph.size + (0 if graph.rooted else 1), dtype=np.bool_)
    mask[graph.internal(y)] = True
    start = graph.internal(x)
    args = _kernel_args(graph)

    def run(job):
        c, size = job
        rng = substream(stream, "lerw-sizes", c)
        out, ok = _lerw_sizes(size, args[0], start, mask, int(budget), rng, *args[1:])
        if not ok:
            raise CapExceeded(f"target not reached within {budget} steps")
        return out

    return np.concatenate(map_ordered(run, enumerate(chunk_sizes(count))))


def walk_to(graph, start, targets, stream, budget=DEFAULT_BUDGET):
    """Walk from ``start`` until it enters ``targets``; kernel-slot path."""
    mask = np.zeros(graph.size, dtype=np.bool_)
    for t in targets:
        mask[graph.internal(t)] = True
    rng = as_generator(stream, "walk-to")
    kind, ip, ix, cum, m, pk, n, d, laz, kill = _kernel_args(graph)
    path, ok = _walk_to_target(kind, graph.internal(start), mask, int(budget), rng,
                               ip, ix, cum, m, pk, n, d, laz, kill)
    if not ok:
        raise CapExceeded(f"target not reached within {budget} steps")
    return path


def lerw_between(graph, x, y, stream, budget=DEFAULT_BUDGET):
    """Loop-erased walk from x to y as a kernel-slot vertex array."""
    path = walk_to(graph, x, [y], stream, budget)
    return path[retained_times(path)]


@njit(cache=True, nogil=True)
def _lerw_lengths_torus(ys, n, d, laz, cap, rng):
    """|LE| of walks from 0 stopped on first hitting ys[i] (-1 if cap hit)."""
    size = n**d
    where = np.full(size, -1, dtype=np.int64)
    stack = np.empty(size, dtype=np.int64)
    out = np.empty(len(ys), dtype=np.int64)
    for k in range(len(ys)):
        y = ys[k]
        top = 0
        v = 0
        where[v] = 0
        stack[0] = v
        top = 1
        t = 0
        ok = True
        while v != y:
            v = _move(v, rng.random(), laz, n, d)
            t += 1
            i = where[v]
            if i >= 0 and i < top and stack[i] == v:
                top = i + 1
            else:
                where[v] = top
                stack[top] = v
                top += 1
            if t >= cap:
                ok = False
                break
        out[k] = top if ok else -1
        for i in range(top):
            where[stack[i]] = -1
    return out


def lerw_lengths_torus(n, count, stream, *, d=4, laziness=0.0, cap=DEFAULT_BUDGET):
    """|LE(X[0,T])| for ``count`` independent pairs x, y uniform on Z^d_n.

    By translation invariance x is fixed at the origin.  The erasure does not
    see holding steps, so the default simple walk gives the same law as the
    lazy one in fewer steps.
    """
    def run(job):
        c, size = job
        rng = substream(stream, "lerw-torus", c)
        ys = rng.integers(0, n**d, size=size, dtype=np.int64)
        out = _lerw_lengths_torus(ys, n, d, laziness, int(cap), rng)
        if (out < 0).any():
            raise CapExceeded("a walk ran past the step cap")
        return out

    return np.concatenate(map_ordered(run, enumerate(chunk_sizes(count))))


# --- distances -------------------------------------------------------------------------

def tree_distance(tree, a, b, *, root_infinite=None):
    """Vertices on the tree path from a to b (inclusive), or INF through the root.

    For a :class:`SpanningTree` the root counts as passing through only when
    the graph has a sentinel root (``root_infinite`` overrides).  For a
    :class:`LabeledTree`, a and b are node labels and label 0 is the root.
    """
    if isinstance(tree, LabeledTree):
        return tree.distance(a, b)
    if isinstance(tree, dict):
        return _parent_map_distance(tree, a, b, ROOT)
    g = tree.graph
    if root_infinite is None:
        root_infinite = g is not None and g.rooted
    ia = g.internal(a) if g is not None else int(a)
    ib = g.internal(b) if g is not None else int(b)
    n = len(tree.parent)
    if not (0 <= ia < n and 0 <= ib < n):
        raise ValueError("vertex absent from tree")
    anc = {}
    u, k = ia, 0
    while True:
        anc[u] = k
        if u == tree.root:
            break
        u, k = tree.parent[u], k + 1
    u, k = ib, 0
    while u not in anc:
        u, k = tree.parent[u], k + 1
    if root_infinite and u == tree.root:
        return INF
    return anc[u] + k + 1


def _parent_map_distance(parent, a, b, root):
    """Distance in a tree stored as {vertex: parent}, INF through ``root``."""
    for v in (a, b):
        if v != root and v not in parent:
            raise ValueError(f"vertex {v} absent from tree")
    anc = {}
    u, k = a, 0
    while True:
        anc[u] = k
        if u == root:
            break
        u, k = parent[u], k + 1
    u, k = b, 0
    while u not in anc:
        u, k = parent[u], k + 1
    if u == root:
        return INF
    return anc[u] + k + 1


# --- partial trees -------------------------------------------------------------------------

@dataclass
class PartialTree:
    graph: WeightedGraph
    r: int
    starts: list
    walks: list
    branches: list
    U: list
    zeta: list
    parent: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.starts)

    @property
    def ell(self):
        return self.zeta[-1] - 1

    def owner(self, j):
        """g(j): the walk that segment j belongs to (1-based)."""
        if not 1 <= j <= self.ell:
            raise IndexError(j)
        return int(np.searchsorted(self.zeta, j, side="right"))

    def window(self, j):
        """Times of A_j inside walk g(j), clipped to [0, U]."""
        i = self.owner(j)
        lo = (j - self.zeta[i - 1]) * self.r
        return lo, min(lo + self.r - 1, self.U[i - 1])

    def distance(self, i, j):
        """d'(x_i, x_j) in T_k (1-based walk indices)."""
        return _parent_map_distance(self.parent, self.starts[i - 1], self.starts[j - 1], ROOT)


def partial_tree(graph, starts, r, stream, *, budget=DEFAULT_BUDGET):
    """Run Wilson's algorithm from the root and then ``starts``, keeping walks."""
    if not graph.rooted:
        raise ValueError("partial trees need a rooted graph")
    if r < 1:
        raise ValueError("r must be >= 1")
    rng = as_generator(stream, "partial")
    kind, ip, ix, cum, m, pk, n, d, laz, kill = _kernel_args(graph)
    mask = np.zeros(graph.size, dtype=np.bool_)
    mask[graph.nverts] = True
    parent = {}
    walks, branches, U, zeta = [], [], [], [1]
    for x in starts:
        if int(x) == ROOT:
            raise ValueError("starts must differ from the root")
        s = graph.internal(x)
        path, ok = _walk_to_target(kind, s, mask, int(budget), rng, ip, ix, cum,
                                   m, pk, n, d, laz, kill)
        if not ok:
            raise CapExceeded(f"branch from {x} used more than {budget} steps")
        path[path == graph.nverts] = ROOT
        times = _erase_dense(path, graph.nverts)
        branch = path[times]
        for a, b in zip(branch[:-1], branch[1:]):
            parent[int(a)] = int(b)
            mask[graph.internal(a)] = True
        walks.append(path)
        branches.append(branch)
        U.append(len(path) - 1)
        zeta.append(zeta[-1] + U[-1] // r + 1)
    return PartialTree(graph, int(r), [int(x) for x in starts], walks, branches, U, zeta, parent)


# --- the labeled construction ---------------------------------------------------------------

@dataclass
class LabeledTree:
    label_of: dict          # node origin -> current label
    node_of: dict           # current label -> node origin
    adj: dict               # node origin -> set of node origins
    history: list           # S_0, S_1, ... as frozensets of labels
    kappa: list

    @property
    def labels(self):
        return set(self.node_of)

    @property
    def survivors(self):
        return set(self.history[-1])

    def edges(self):
        out = set()
        for a, nb in self.adj.items():
            for b in nb:
                la, lb = self.label_of[a], self.label_of[b]
                out.add((min(la, lb), max(la, lb)))
        return sorted(out)

    def label_of_origin(self, origin):
        return self.label_of.get(origin)

    def path(self, a, b):
        """Labels along the tree path from label a to label b."""
        if a not in self.node_of or b not in self.node_of:
            raise ValueError("label absent from tree")
        s, t = self.node_of[a], self.node_of[b]
        prev = {s: None}
        q = deque([s])
        while q:
            u = q.popleft()
            if u == t:
                break
            for v in self.adj[u]:
                if v not in prev:
                    prev[v] = u
                    q.append(v)
        if t not in prev:
            raise ValueError("labels lie in different components")
        out = []
        u = t
        while u is not None:
            out.append(self.label_of[u])
            u = prev[u]
        return out[::-1]

    def distance(self, a, b):
        p = self.path(a, b)
        return INF if 0 in p else len(p)

    def is_forest(self):
        nodes = list(self.adj)
        nedges = sum(len(v) for v in self.adj.values()) // 2
        seen = set()
        comps = 0
        for s in nodes:
            if s in seen:
                continue
            comps += 1
            seen.add(s)
            q = [s]
            while q:
                u = q.pop()
                for v in self.adj[u]:
                    if v not in seen:
                        seen.add(v)
                        q.append(v)
        return nedges == len(nodes) - comps


def _owners(kappa):
    ell = kappa[-1] - 1
    f = np.zeros(ell + 1, dtype=np.int64)
    for i in range(len(kappa) - 1):
        f[kappa[i] : kappa[i + 1]] = i + 1
    return f


def collapsed_tree(kappa, I, owner=None):
    """Replay the labeled-tree construction.

    ``kappa`` is the breakpoint list kappa_1 = 1 < ... < kappa_{k+1} and
    ``I[i, j]`` (``0 <= i < j <= l``) the hit indicators, with row 0 the root.
    """
    kappa = [int(v) for v in kappa]
    if kappa[0] != 1 or any(b <= a for a, b in zip(kappa, kappa[1:])):
        raise ValueError("breakpoints must start at 1 and increase")
    ell = kappa[-1] - 1
    I = np.asarray(I)
    if I.shape[0] < ell + 1 or I.shape[1] < ell + 1:
        raise ValueError("indicator matrix too small")
    f = _owners(kappa) if owner is None else np.asarray([0] + [owner(j) for j in range(1, ell + 1)])
    starts = set(kappa[:-1])
    label_of, node_of, adj = {0: 0}, {0: 0}, {0: set()}
    S = set()
    history = [frozenset()]

    def link(a, b):
        if a not in node_of or b not in node_of:
            raise ValueError(f"construction references missing label {a if a not in node_of else b}")
        u, v = node_of[a], node_of[b]
        adj[u].add(v)
        adj[v].add(u)

    for j in range(1, ell + 1):
        hits = [i for i in sorted(S | {0}) if I[i, j]]
        if not hits:
            node_of[j] = j
            label_of[j] = j
            adj[j] = set()
            if j not in starts:
                link(j - 1, j)
            S = S | {j}
        else:
            i = hits[0]
            if i == 0:
                if j in starts:
                    raise ValueError(f"segment {j} starts a walk but hits the root")
                link(j - 1, 0)
            elif f[i] == f[j]:
                o = node_of.pop(i)
                for h in range(i + 1, j):
                    if h in node_of:
                        gone = node_of.pop(h)
                        for v in adj.pop(gone):
                            adj[v].discard(gone)
                        del label_of[gone]
                node_of[j] = o
                label_of[o] = j
                S = {h for h in S if h < i} | {j}
            else:
                if j not in starts:
                    link(j - 1, i)
        history.append(frozenset(S))
    return LabeledTree(label_of, node_of, adj, history, kappa)


def complete_graph_construction(pt):
    """Labeled tree of a K_{m,alpha} partial tree with r = 1.

    Entry ``I[i, j] = 1`` iff v_i = v_j != root, and ``I[0, j] = 1`` iff v_j is
    the root.  Returns ``(tree, v)`` where ``v[j]`` is the j-th visited vertex.
    """
    if pt.r != 1:
        raise ValueError("the complete-graph labeling uses r = 1")
    v = np.concatenate([[ROOT]] + [w for w in pt.walks])  # v[0] is a placeholder
    ell = len(v) - 1
    I = np.zeros((ell + 1, ell + 1), dtype=np.int8)
    for j in range(1, ell + 1):
        if v[j] == ROOT:
            I[0, j] = 1
        else:
            I[1:j, j] = v[1:j] == v[j]
    return collapsed_tree(pt.zeta, I), v


# --- multi-walk classification --------------------------------------------------------------

@dataclass
class MultiWalkReport:
    walk_reports: list
    walk_decomps: list
    D: dict
    I: np.ndarray = None
    N: np.ndarray = None
    le_lengths: np.ndarray = None
    tree: LabeledTree = None
    S: set = None
    J: set = None
    checks: dict = field(default_factory=dict)

    @property
    def walks_good(self):
        return all(r.is_good for r in self.walk_reports)

    @property
    def G(self):
        return self.walks_good and all(v is None for v in self.D.values())


def classify_multiwalk(pt, r=None, w=None, tau=None, *, plan=None):
    """D1..D4, per-walk B events, indicators, labels and the tree T*.

    On G it also evaluates the N_j bounds and the distance comparison; the
    results land in ``report.checks``.
    """
    if plan is not None:
        r, w, tau = plan.r, plan.w, plan.tau
    if r != pt.r:
        raise ValueError("plan segment length differs from the partial tree's")
    ell = pt.ell
    g = np.array([0] + [pt.owner(j) for j in range(1, ell + 1)])

    def adjacent(a, b):
        return g[a] == g[b] and abs(a - b) == 1

    R, Rp, Rm = [], [], []
    for j in range(1, ell + 1):
        x = pt.walks[g[j] - 1]
        lo, hi = pt.window(j)
        Rj = x[lo : hi + 1]
        a = lo + w
        b = min(lo + r - w - 1, hi)
        inner = (np.arange(lo, hi + 1) >= a) & (np.arange(lo, hi + 1) <= b)
        R.append(Rj)
        Rp.append(Rj[inner])
        Rm.append(Rj[~inner])

    codes, size = seg._codes(R + Rm)
    inc = seg._incidence(codes[:ell], size)
    inc_m = seg._incidence(codes[ell:], size)
    meet = seg._meets(inc, inc)
    nonadj = ~np.eye(ell, dtype=bool)
    for a in range(ell - 1):
        if g[a + 1] == g[a + 2]:
            nonadj[a, a + 1] = nonadj[a + 1, a] = False
    far = meet & nonadj
    root_hit = np.array([(s == ROOT).any() for s in R])

    D = {"D1": None, "D2": None, "D3": None, "D4": None}
    many = np.flatnonzero(far.sum(axis=1) >= 2)
    if len(many):
        a = int(many[0])
        b, c = np.flatnonzero(far[a])[:2]
        D["D1"] = (a + 1, int(b) + 1, int(c) + 1)
    m2 = seg._meets(inc, inc_m) & nonadj
    if m2.any():
        a, b = np.argwhere(m2)[0]
        D["D2"] = (int(a) + 1, int(b) + 1)
    for a in np.flatnonzero(root_hit):
        if far[a].any():
            D["D3"] = (int(a) + 1, int(np.flatnonzero(far[a])[0]) + 1)
            break
    for z in pt.zeta[:-1]:
        a = z - 1
        if root_hit[a]:
            D["D4"] = (z, 0)
            break
        if far[a].any():
            D["D4"] = (z, int(np.flatnonzero(far[a])[0]) + 1)
            break

    # per-walk goodness
    reports, decomps = [], []
    for i, x in enumerate(pt.walks):
        plan_i = seg.make_plan(pt.U[i], r, w, tau) if w >= 2 * tau else \
            seg.SegmentPlan(pt.U[i], r, w, tau)
        dec = seg.decompose(x, plan_i)
        decomps.append(dec)
        reports.append(dec.report)

    # indicators on the segment index set
    I = seg.indicator_matrix(R, Rp, adjacent)
    I[0, 1:] = root_hit
    # labels: retained times of each walk, minus the hitting time
    N = np.zeros(ell + 1, dtype=np.int64)
    for i, x in enumerate(pt.walks):
        times = retained_times(x)[:-1]
        lab = times // r + pt.zeta[i]
        N += np.bincount(lab, minlength=ell + 1)[: ell + 1]
    le_len = np.zeros(ell + 1, dtype=np.int64)
    for j, s in enumerate(R, 1):
        le_len[j] = len(retained_times(s))
    rep = MultiWalkReport(reports, decomps, D, I, N, le_len)
    if rep.G:
        _check_on_G(rep, pt, w)
    return rep


def _check_on_G(rep, pt, w):
    ell = pt.ell
    tree = collapsed_tree(pt.zeta, rep.I)
    S = tree.survivors
    sub = rep.I.astype(bool)
    inv = sub.any(axis=0) | sub.any(axis=1)
    J = {int(h) for h in np.flatnonzero(inv) if h >= 1}
    rep.tree, rep.S, rep.J = tree, S, J
    label_bad = seg.pathprop_violations(rep.N, rep.le_lengths, S, J, w, ell)
    walk_bad = [(i + 1, v) for i, d in enumerate(rep.walk_decomps) for v in d.violations]
    budget = int(sum(rep.N[h] for h in J))
    dist_bad, inf_bad, rows = [], [], []
    for a in range(1, pt.k + 1):
        for b in range(a + 1, pt.k + 1):
            dp = pt.distance(a, b)
            la = tree.label_of_origin(pt.zeta[a - 1])
            lb = tree.label_of_origin(pt.zeta[b - 1])
            if la is None or lb is None:
                inf_bad.append((a, b, "start label missing"))
                continue
            p = tree.path(la, lb)
            ds = INF if 0 in p else len(p)
            total = int(sum(rep.N[h] for h in p if h != 0))
            rows.append((a, b, dp, ds, total, budget))
            if (dp == INF) != (ds == INF):
                inf_bad.append((a, b, dp, ds))
            elif dp != INF and abs(dp - total) > budget:
                dist_bad.append((a, b, dp, total, budget))
    rep.checks = dict(label=label_bad, walk=walk_bad, dist=dist_bad, inf=inf_bad, pairs=rows)
