"""Line-breaking construction of the continuum random tree and Rayleigh tools.

Cut times come from a Poisson process of rate t on [0, inf).  The time change
t -> t^2/2 turns it into a unit-rate process, so t_k = sqrt(2 Gamma_k) with
Gamma_k a sum of k unit exponentials.  Segment 1 is [0, t_1] with leaves z_1,
z_2 at its ends; segment i (length t_i - t_{i-1}) hangs off a uniform point of
the tree built so far and ends at leaf z_{i+1}.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .parallel import map_ordered
from .rng import as_generator, chunk_sizes, substream


@dataclass
class CrtSample:
    cut_times: np.ndarray
    attachments: list  # (segment, offset) for segments 2..k-1
    leaves: list  # (segment, offset) for z_1..z_k
    distances: np.ndarray

    @property
    def k(self):
        return len(self.leaves)

    def validate(self, tol=1e-9):
        t, D = self.cut_times, self.distances
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise AssertionError("cut times not strictly increasing")
        if not np.allclose(D, D.T, atol=0) or np.any(np.diag(D) != 0):
            raise AssertionError("distance matrix not symmetric with zero diagonal")
        if not is_tree_metric(D, tol):
            raise AssertionError("distance matrix violates the four-point condition")


def cut_times_from_exponentials(e):
    """t_k = sqrt(2 * cumsum(e)) along the last axis."""
    return np.sqrt(2.0 * np.cumsum(e, axis=-1))


def sample_cut_times(count, stream, size=None):
    """First ``count`` points of the rate-t Poisson process (``size`` rows if given)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if size is None:
        rng = as_generator(stream, "crt")
        return cut_times_from_exponentials(rng.standard_exponential(count))

    def run(job):
        c, m = job
        rng = substream(stream, "cut-times", c)
        return cut_times_from_exponentials(rng.standard_exponential((m, count)))

    return np.concatenate(map_ordered(run, enumerate(chunk_sizes(size))))


def _build(t, u):
    """Attachments, leaves and distances from cut times ``t`` and uniforms ``u``."""
    k = len(t) + 1
    lengths = np.diff(t, prepend=0.0)
    parent = [None]  # segment 0 is the first segment; its base is z_1
    for i in range(1, k - 1):
        x = u[i - 1] * t[i - 1]
        cum = np.cumsum(lengths[:i])
        s = min(int(np.searchsorted(cum, x, side="right")), i - 1)
        off = x - (cum[s] - lengths[s])
        parent.append((s, float(off)))
    leaves = [(0, 0.0), (0, float(t[0]))] + [(i, float(lengths[i])) for i in range(1, k - 1)]

    def chain(p):
        # (segment, offset, distance climbed so far) from p up to segment 0
        out, acc = [], 0.0
        s, o = p
        while True:
            out.append((s, o, acc))
            if parent[s] is None:
                return out
            acc += o
            s, o = parent[s]

    chains = [chain(p) for p in leaves]
    D = np.zeros((k, k))
    for a in range(k):
        where = {s: (o, acc) for s, o, acc in chains[a]}
        for b in range(a + 1, k):
            for s, o, acc in chains[b]:
                if s in where:
                    oa, acca = where[s]
                    D[a, b] = D[b, a] = acca + acc + abs(oa - o)
                    break
    return parent[1:], leaves, D


def sample_crt_distances(k, stream):
    """One draw of the pairwise distances between k leaves of the line-breaking tree."""
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = as_generator(stream, "crt")
    t = cut_times_from_exponentials(rng.standard_exponential(k - 1))
    u = rng.random(k - 2)
    att, leaves, D = _build(t, u)
    return CrtSample(t, att, leaves, D)


def sample_crt_matrices(k, trials, stream):
    """``trials`` distance matrices, shape (trials, k, k)."""
    if k < 2:
        raise ValueError("k must be >= 2")

    def run(job):
        c, m = job
        rng = substream(stream, "crt-batch", c)
        T = cut_times_from_exponentials(rng.standard_exponential((m, k - 1)))
        U = rng.random((m, k - 2))
        return np.stack([_build(T[i], U[i])[2] for i in range(m)])

    return np.concatenate(map_ordered(run, enumerate(chunk_sizes(trials))))


def is_tree_metric(D, tol=1e-9):
    """Triangle inequality and the four-point condition, checked exhaustively."""
    D = np.asarray(D, dtype=float)
    k = len(D)
    scale = tol * max(1.0, float(np.abs(D).max()) if D.size else 1.0)
    for i, j, l in itertools.permutations(range(k), 3):
        if D[i, j] > D[i, l] + D[l, j] + scale:
            return False
    for i, j, a, b in itertools.combinations(range(k), 4):
        s = sorted([D[i, j] + D[a, b], D[i, a] + D[j, b], D[i, b] + D[j, a]])
        if s[2] - s[1] > scale:
            return False
    return True


def rayleigh_survival(x):
    """P(R > x) = exp(-x^2/2)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    out = np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def rayleigh_fit(samples):
    """Maximum-likelihood scale: sigma^2 = sum x^2 / (2N)."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one sample")
    return math.sqrt(float(np.sum(x * x)) / (2 * x.size))


def ks_statistic(samples, survival):
    """sup |F_emp - F| where F = 1 - survival."""
    x = np.sort(np.asarray(samples, dtype=float))
    N = x.size
    if N == 0:
        raise ValueError("need at least one sample")
    F = 1.0 - np.asarray(survival(x), dtype=float)
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


def ks_rayleigh(samples):
    """KS distance of ``samples`` to the best-fit Rayleigh law, and the fitted scale."""
    s = rayleigh_fit(samples)
    return ks_statistic(samples, lambda x: rayleigh_survival(x / s)), s
