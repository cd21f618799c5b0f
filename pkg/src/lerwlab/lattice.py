"""Torus and lattice geometry plus random-walk kernels.

Vertices of the torus Z^d_n are packed into a single int64,
``v = sum(c[i] * n**i)``.  The root of a rooted graph is the sentinel ``ROOT``
which lies outside ``[0, n**d)``.

All walks consume exactly one uniform per step.  With holding probability
``h`` a uniform ``u`` maps to

* ``u < h``: stay put,
* otherwise direction ``floor((u - h) / (1 - h) * 2d)``; direction ``2i`` is
  ``+e_i`` and ``2i + 1`` is ``-e_i``.

Rooted walks first test ``u < kill`` (jump to the root) and rescale the rest of
the interval to the same rule.  Because torus and lattice walks use the same
map, a lattice path reduced mod n is bit-identical to the torus path drawn
from the same stream.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .rng import as_generator

ROOT = -1
_INT_LIMIT = 2**62


class CapExceeded(RuntimeError):
    """A walk ran past its step budget."""


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple
    n: int

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if self.n < 3:
            raise ValueError("torus side n must be >= 3")
        if len(self.coords) < 1:
            raise ValueError("dimension must be >= 1")
        if any(c < 0 or c >= self.n for c in self.coords):
            raise ValueError(f"coordinates {self.coords} outside [0, {self.n})")

    @property
    def d(self):
        return len(self.coords)

    def pack(self):
        return int(sum(c * self.n**i for i, c in enumerate(self.coords)))

    @classmethod
    def from_id(cls, v, n, d):
        return cls(tuple(unpack(v, n, d)), n)


@dataclass(frozen=True)
class LatticePoint:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))
        if any(abs(c) >= _INT_LIMIT for c in self.coords):
            raise OverflowError("lattice coordinate out of representable range")

    @property
    def d(self):
        return len(self.coords)


@dataclass(frozen=True)
class WalkConfig:
    n: int
    d: int = 4
    laziness: float = 0.5
    root_kill_prob: float = 0.0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("torus side n must be >= 3")
        if self.d < 1:
            raise ValueError("dimension d must be >= 1")
        if not 0 <= self.laziness < 1:
            raise ValueError("laziness must lie in [0, 1)")
        if not 0 <= self.root_kill_prob <= 1:
            raise ValueError("root_kill_prob must lie in [0, 1]")

    @property
    def size(self):
        return self.n**self.d

    @property
    def strides(self):
        return np.array([self.n**i for i in range(self.d)], dtype=np.int64)

    def replace(self, **kw):
        args = dict(n=self.n, d=self.d, laziness=self.laziness,
                    root_kill_prob=self.root_kill_prob)
        args.update(kw)
        return WalkConfig(**args)


@dataclass
class WalkPath:
    """A walk ``X_0..X_T`` as packed vertex ids (``ROOT`` for the root)."""

    steps: np.ndarray
    n: int
    d: int
    absorbed_at_root: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        if self.absorbed_at_root is not None and self.absorbed_at_root != len(self.steps) - 1:
            raise ValueError("absorbed_at_root must be the final index")

    def __len__(self):
        return len(self.steps)

    @property
    def start(self):
        return TorusPoint.from_id(self.steps[0], self.n, self.d)

    @property
    def T(self):
        return len(self.steps) - 1

    def coords(self):
        """``(len, d)`` coordinate array; the root row is all -1."""
        out = np.empty((len(self.steps), self.d), dtype=np.int64)
        v = self.steps.copy()
        for i in range(self.d):
            out[:, i] = v % self.n
            v //= self.n
        out[self.steps == ROOT] = -1
        return out


def unpack(v, n, d):
    v = int(v)
    out = []
    for _ in range(d):
        out.append(v % n)
        v //= n
    return out


def pack_coords(coords, n):
    """Pack an ``(..., d)`` integer array of torus coordinates."""
    coords = np.asarray(coords, dtype=np.int64)
    strides = n ** np.arange(coords.shape[-1], dtype=np.int64)
    return (coords % n) @ strides


def as_vertex(x, cfg):
    if isinstance(x, TorusPoint):
        if x.n != cfg.n or x.d != cfg.d:
            raise ValueError("point does not live on this torus")
        return x.pack()
    x = int(x)
    if not 0 <= x < cfg.size:
        raise ValueError(f"vertex id {x} outside torus of size {cfg.size}")
    return x


def torus_distance_ok(a, b, n, d):
    """True if packed vertices a, b are equal or nearest neighbours."""
    if a == b:
        return True
    ca, cb = unpack(a, n, d), unpack(b, n, d)
    diff = [(x - y) % n for x, y in zip(ca, cb)]
    nz = [x for x in diff if x]
    return len(nz) == 1 and nz[0] in (1, n - 1)


# --- step map ---------------------------------------------------------------

def _deltas(u, laziness, d):
    """Vectorised step map: uniforms (shape S) -> coordinate increments (S + (d,))."""
    u = np.asarray(u)
    move = u >= laziness
    k = np.floor((u - laziness) / (1.0 - laziness) * (2 * d)).astype(np.int64)
    k = np.clip(k, 0, 2 * d - 1)
    axis = k // 2
    sign = 1 - 2 * (k % 2)
    out = np.zeros(u.shape + (d,), dtype=np.int64)
    np.put_along_axis(out, axis[..., None], (sign * move)[..., None], axis=-1)
    return out


@njit(cache=True, nogil=True)
def _move(v, u, laziness, n, d):
    if u < laziness:
        return v
    k = int((u - laziness) / (1.0 - laziness) * (2 * d))
    if k > 2 * d - 1:
        k = 2 * d - 1
    axis = k // 2
    stride = 1
    for _ in range(axis):
        stride *= n
    c = (v // stride) % n
    if k % 2 == 0:
        c2 = c + 1 if c + 1 < n else 0
    else:
        c2 = c - 1 if c > 0 else n - 1
    return v + (c2 - c) * stride


@njit(cache=True, nogil=True)
def _grow(buf):
    out = np.empty(2 * len(buf), dtype=np.int64)
    out[: len(buf)] = buf
    return out


@njit(cache=True, nogil=True)
def _rooted_walk_kernel(start, kill, laziness, n, d, max_steps, rng):
    buf = np.empty(64, dtype=np.int64)
    buf[0] = start
    v = start
    t = 0
    absorbed = False
    while t < max_steps:
        u = rng.random()
        t += 1
        if t >= len(buf):
            buf = _grow(buf)
        if u < kill:
            buf[t] = -1
            absorbed = True
            break
        v = _move(v, (u - kill) / (1.0 - kill), laziness, n, d)
        buf[t] = v
    return buf[: t + 1].copy(), absorbed


@njit(cache=True, nogil=True)
def _hit_kernel(start, in_target, kill, laziness, n, d, cap, rng):
    """Walk until a vertex with ``in_target`` set (or the root) is visited.

    ``in_target`` has length ``n**d + 1``; its last entry stands for the root.
    Returns ``(path, ok)``; ``ok`` is False when ``cap`` steps were used up.
    """
    buf = np.empty(64, dtype=np.int64)
    buf[0] = start
    v = start
    if in_target[v]:
        return buf[:1].copy(), True
    root_slot = len(in_target) - 1
    t = 0
    while t < cap:
        u = rng.random()
        t += 1
        if t >= len(buf):
            buf = _grow(buf)
        if kill > 0.0 and u < kill:
            buf[t] = -1
            if in_target[root_slot]:
                return buf[: t + 1].copy(), True
            # root not absorbing for this target: treat as an ordinary vertex
            # from which the walk cannot continue
            return buf[: t + 1].copy(), False
        if kill > 0.0:
            u = (u - kill) / (1.0 - kill)
        v = _move(v, u, laziness, n, d)
        buf[t] = v
        if in_target[v]:
            return buf[: t + 1].copy(), True
    return buf[: t + 1].copy(), False


# --- public operations ---------------------------------------------------------

def simulate_walk(start, length, cfg, stream):
    """Walk of exactly ``length`` steps on the torus (no root)."""
    if cfg.root_kill_prob != 0:
        raise ValueError("simulate_walk requires root_kill_prob == 0")
    if length < 0:
        raise ValueError("length must be >= 0")
    rng = as_generator(stream, "walk")
    v0 = as_vertex(start, cfg)
    u = rng.random(int(length))
    inc = _deltas(u, cfg.laziness, cfg.d)
    c = np.vstack([np.array(unpack(v0, cfg.n, cfg.d))[None, :], inc]).cumsum(axis=0)
    return WalkPath(pack_coords(c, cfg.n), cfg.n, cfg.d)


def simulate_lattice_walk(start, length, laziness, stream):
    """Walk on the unbounded lattice Z^d; returns a ``(length + 1, d)`` array.

    Driven by the same uniforms as :func:`simulate_walk` for the same stream,
    so ``pack_coords(path % n, n)`` reproduces the torus walk.
    """
    if length < 0:
        raise ValueError("length must be >= 0")
    if not isinstance(start, LatticePoint):
        start = LatticePoint(start)
    if max((abs(c) for c in start.coords), default=0) + length >= _INT_LIMIT:
        raise OverflowError("lattice walk could leave the representable range")
    rng = as_generator(stream, "walk")
    u = rng.random(int(length))
    inc = _deltas(u, laziness, start.d)
    return np.vstack([np.array(start.coords, dtype=np.int64)[None, :], inc]).cumsum(axis=0)


def simulate_rooted_walk(start, cfg, max_steps, stream):
    """Walk killed (sent to ``ROOT``) at rate ``cfg.root_kill_prob`` per step."""
    if cfg.root_kill_prob <= 0:
        raise ValueError("simulate_rooted_walk requires root_kill_prob > 0")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    rng = as_generator(stream, "rooted")
    path, absorbed = _rooted_walk_kernel(as_vertex(start, cfg), cfg.root_kill_prob,
                                         cfg.laziness, cfg.n, cfg.d, int(max_steps), rng)
    return WalkPath(path, cfg.n, cfg.d, len(path) - 1 if absorbed else None)


def walk_until_hit(start, target, cfg, cap, stream):
    """Walk until the first visit to ``target`` (a collection of vertices).

    With ``cfg.root_kill_prob > 0`` the walk may also be killed; include
    ``ROOT`` in ``target`` to stop there.  Raises :class:`CapExceeded` when the
    budget runs out.
    """
    if cap <= 0:
        raise ValueError("cap must be > 0")
    mask = target_mask(target, cfg)
    if not mask.any():
        raise ValueError("target must be nonempty")
    rng = as_generator(stream, "hit")
    path, ok = _hit_kernel(as_vertex(start, cfg), mask, cfg.root_kill_prob,
                           cfg.laziness, cfg.n, cfg.d, int(cap), rng)
    if not ok:
        if len(path) > 1 and path[-1] == ROOT:
            raise CapExceeded("walk was killed before reaching the target")
        raise CapExceeded(f"target not reached within {cap} steps")
    absorbed = len(path) - 1 if path[-1] == ROOT else None
    return WalkPath(path, cfg.n, cfg.d, absorbed)


def target_mask(target, cfg):
    mask = np.zeros(cfg.size + 1, dtype=np.bool_)
    if isinstance(target, np.ndarray) and target.dtype == np.bool_:
        mask[: cfg.size] = target[: cfg.size]
        return mask
    for x in target:
        if isinstance(x, (int, np.integer)) and int(x) == ROOT:
            mask[-1] = True
        else:
            mask[as_vertex(x, cfg)] = True
    return mask


def batch_walks(starts, length, cfg, rng):
    """Many independent walks at once; returns ``(length + 1, B)`` packed ids.

    Uniforms are drawn step-major (``rng.random((length, B))``), so a longer
    batch from the same stream extends the shorter one.
    """
    starts = np.asarray(starts, dtype=np.int64)
    u = rng.random((int(length), len(starts)))
    inc = _deltas(u, cfg.laziness, cfg.d)
    c0 = np.stack([(starts // cfg.n**i) % cfg.n for i in range(cfg.d)], axis=-1)
    c = np.concatenate([c0[None], inc], axis=0).cumsum(axis=0)
    return pack_coords(c, cfg.n)


def uniform_vertices(count, cfg, rng):
    return rng.integers(0, cfg.size, size=count, dtype=np.int64)
