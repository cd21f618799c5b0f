"""Chronological loop erasure, retained-time sets and local cutpoints.

The erasure is a single forward pass: a stack of (vertex, time) pairs and a
vertex -> stack-slot map.  Revisiting a vertex truncates the stack back to its
slot and stamps the slot with the new time, so each surviving vertex carries
the time of its *last* visit.  Those stamps are exactly the retained times of
the max-last-visit recursion.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .lattice import WalkPath
from .rng import chunk_sizes, substream
from .parallel import map_ordered

_EMPTY = np.iinfo(np.int64).min


@dataclass
class ErasedPath:
    vertices: np.ndarray
    retained_times: np.ndarray

    def __len__(self):
        return len(self.vertices)

    def as_path(self, like=None):
        if like is None:
            return self.vertices.copy()
        return WalkPath(self.vertices.copy(), like.n, like.d)


@njit(cache=True, nogil=True)
def _table_size(count):
    size = 16
    while size < 2 * count:
        size *= 2
    return size


@njit(cache=True, nogil=True)
def _slot(keys, v, mask, shift):
    h = (np.uint64(v) * np.uint64(0x9E3779B97F4A7C15)) >> np.uint64(shift)
    s = np.int64(h) & mask
    while keys[s] != v and keys[s] != _EMPTY:
        s = (s + 1) & mask
    return s


@njit(cache=True, nogil=True)
def _erase_hashed(path):
    """Retained times of ``path`` (any int64 vertex labels)."""
    m = len(path)
    size = _table_size(m)
    mask = size - 1
    shift = 64 - int(np.log2(size))
    keys = np.full(size, _EMPTY, dtype=np.int64)
    slots = np.empty(size, dtype=np.int64)
    stack_v = np.empty(m, dtype=np.int64)
    stack_t = np.empty(m, dtype=np.int64)
    top = 0
    for t in range(m):
        v = path[t]
        s = _slot(keys, v, mask, shift)
        if keys[s] == v:
            i = slots[s]
            if i < top and stack_v[i] == v:
                top = i + 1
                stack_t[i] = t
                continue
        else:
            keys[s] = v
        slots[s] = top
        stack_v[top] = v
        stack_t[top] = t
        top += 1
    return stack_t[:top].copy()


@njit(cache=True, nogil=True)
def _erase_dense(path, nverts):
    """As ``_erase_hashed`` for labels in ``[0, nverts)`` plus ROOT (-1)."""
    m = len(path)
    where = np.full(nverts + 1, -1, dtype=np.int64)
    stack_v = np.empty(m, dtype=np.int64)
    stack_t = np.empty(m, dtype=np.int64)
    top = 0
    for t in range(m):
        v = path[t]
        key = v if v >= 0 else nverts
        i = where[key]
        if i >= 0 and i < top and stack_v[i] == v:
            top = i + 1
            stack_t[i] = t
        else:
            where[key] = top
            stack_v[top] = v
            stack_t[top] = t
            top += 1
    return stack_t[:top].copy()


def _as_ids(path):
    if isinstance(path, WalkPath):
        return path.steps
    arr = np.asarray(path)
    if arr.ndim == 2:
        return pack_lattice(arr)
    return arr.astype(np.int64, copy=False)


def pack_lattice(coords):
    """Injective int64 labels for an ``(len, d)`` array of lattice points."""
    coords = np.asarray(coords, dtype=np.int64)
    d = coords.shape[1]
    bits = 63 // d
    off = 1 << (bits - 1)
    if coords.size and (coords.min() < -off or coords.max() >= off):
        raise OverflowError("lattice path too spread out to pack")
    out = np.zeros(len(coords), dtype=np.int64)
    for i in range(d):
        out |= (coords[:, i] + off) << (bits * i)
    return out


def retained_times(path, nverts=None):
    ids = _as_ids(path)
    if len(ids) == 0:
        raise ValueError("cannot erase an empty path")
    if nverts is not None:
        return _erase_dense(ids, int(nverts))
    return _erase_hashed(ids)


def loop_erase(path):
    """Loop erasure of a path (``WalkPath``, 1-d ids, or ``(len, d)`` coordinates)."""
    ids = _as_ids(path)
    nverts = path.n**path.d if isinstance(path, WalkPath) else None
    times = retained_times(ids, nverts)
    raw = path.steps if isinstance(path, WalkPath) else np.asarray(path)
    return ErasedPath(raw[times], times)


def retained_indices(path, u, v):
    """The set W(u, v) of times retained by erasing ``path[u..v]``."""
    ids = _as_ids(path)
    if not 0 <= u <= v < len(ids):
        raise IndexError(f"bad range [{u}, {v}] for a path of {len(ids)} vertices")
    return u + _erase_hashed(np.ascontiguousarray(ids[u : v + 1]))


@njit(cache=True, nogil=True)
def _cutpoint_scan(ids, k, nid):
    m = len(ids)
    past = np.zeros(nid, dtype=np.int64)
    fut = np.zeros(nid, dtype=np.int64)
    shared = 0
    for i in range(0, k):
        past[ids[i]] += 1
    for i in range(k + 1, 2 * k + 1):
        a = ids[i]
        if fut[a] == 0 and past[a] > 0:
            shared += 1
        fut[a] += 1
    out = np.empty(m, dtype=np.int64)
    count = 0
    u = k
    while True:
        if shared == 0:
            out[count] = u
            count += 1
        if u + 1 > m - 1 - k:
            break
        # past loses ids[u-k], gains ids[u]
        a = ids[u - k]
        past[a] -= 1
        if past[a] == 0 and fut[a] > 0:
            shared -= 1
        a = ids[u]
        if past[a] == 0 and fut[a] > 0:
            shared += 1
        past[a] += 1
        # future loses ids[u+1], gains ids[u+k+1]
        a = ids[u + 1]
        fut[a] -= 1
        if fut[a] == 0 and past[a] > 0:
            shared -= 1
        a = ids[u + k + 1]
        if fut[a] == 0 and past[a] > 0:
            shared += 1
        fut[a] += 1
        u += 1
    return out[:count].copy()


def local_cutpoints(path, k):
    """Times u in [k, len-1-k] whose k-step past and future vertex sets are disjoint."""
    if k < 1:
        raise ValueError("window k must be >= 1")
    ids = _as_ids(path)
    if len(ids) <= 2 * k:
        raise ValueError(f"path of {len(ids)} vertices too short for window {k}")
    _, inv = np.unique(ids, return_inverse=True)
    inv = inv.astype(np.int64).ravel()
    return _cutpoint_scan(inv, int(k), int(inv.max()) + 1)


# --- retention on the unbounded lattice ---------------------------------------

@njit(cache=True, nogil=True)
def _lattice_le(u, laziness, d):
    """Walk on Z^d from the origin driven by uniforms ``u``; return retained times."""
    m = len(u) + 1
    bits = 63 // d
    off = np.int64(1) << (bits - 1)
    ids = np.empty(m, dtype=np.int64)
    c = np.zeros(d, dtype=np.int64)
    key = np.int64(0)
    for i in range(d):
        key |= off << (bits * i)
    ids[0] = key
    for t in range(1, m):
        x = u[t - 1]
        if x >= laziness:
            kk = int((x - laziness) / (1.0 - laziness) * (2 * d))
            if kk > 2 * d - 1:
                kk = 2 * d - 1
            a = kk // 2
            c[a] += 1 if kk % 2 == 0 else -1
            if c[a] >= off or c[a] < -off:
                raise OverflowError("lattice walk left the packable range")
            key = np.int64(0)
            for i in range(d):
                key |= (c[i] + off) << (bits * i)
        ids[t] = key
    return _erase_hashed(ids)


def lattice_erased_times(length, laziness, d, rng):
    return _lattice_le(rng.random(int(length)), laziness, d)


def estimate_retention(k, horizon=None, trials=1000, stream=0, *, d=4, laziness=0.0):
    """Estimate a_k = P(time k survives erasure) for a walk on Z^d.

    The infinite future is truncated at ``horizon`` (default
    ``max(100 k, 10^4)``), which is returned alongside the estimate.
    """
    from .estimators import Estimate

    if horizon is None:
        horizon = max(100 * k, 10**4)
    if horizon < 2 * k:
        raise ValueError("horizon must be >= 2k")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def run(job):
        c, size = job
        rng = substream(stream, "retention", c)
        hits = 0
        for _ in range(size):
            times = lattice_erased_times(horizon, laziness, d, rng)
            i = np.searchsorted(times, k)
            hits += int(i < len(times) and times[i] == k)
        return hits

    hits = sum(map_ordered(run, enumerate(chunk_sizes(trials))))
    p = hits / trials
    return Estimate(p, float(np.sqrt(p * (1 - p) / trials)), trials,
                    dict(k=k, horizon=horizon, d=d, laziness=laziness))
