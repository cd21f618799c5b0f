"""Monte Carlo estimators and calibration constants.

Every estimator draws its walks chunk by chunk from keyed substreams, so the
same ``(stream, trials)`` pair always yields the same number regardless of the
thread count.  Walk streams do not depend on the target sets, which makes
comparisons such as Cap(U) vs Cap(U') or Close(U, U) vs Cap(U) exact
couplings.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import WalkConfig, batch_walks
from .looperase import _erase_dense, lattice_erased_times
from .parallel import map_ordered
from .rng import chunk_sizes, substream

_BLOCK = 2048


@dataclass
class Estimate:
    value: float
    stderr: float
    trials: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")

    def interval(self, z=1.96):
        return self.value - z * self.stderr, self.value + z * self.stderr


def _bernoulli(hits, trials, params):
    p = hits / trials
    return Estimate(p, math.sqrt(p * (1 - p) / trials), trials, params)


def _mask(U, cfg):
    m = np.zeros(cfg.size, dtype=bool)
    U = np.asarray(list(U) if not isinstance(U, np.ndarray) else U, dtype=np.int64)
    if U.size and (U.min() < 0 or U.max() >= cfg.size):
        raise ValueError("set contains vertices outside the torus")
    m[U] = True
    return m


def _uniform_walk_flags(masks, M, cfg, trials, stream):
    """Per-walk 'visited mask k by time M' flags for uniform-start walks."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if M < 0:
        raise ValueError("M must be >= 0")

    def run(job):
        c, size = job
        rng = substream(stream, "uniform-walks", c)
        pos = rng.integers(0, cfg.size, size=size, dtype=np.int64)
        flags = [m[pos] for m in masks]
        done = 0
        while done < M:
            blk = min(M - done, _BLOCK)
            P = batch_walks(pos, blk, cfg, rng)[1:]
            for f, m in zip(flags, masks):
                f |= m[P].any(axis=0)
            pos = P[-1]
            done += blk
        return flags

    parts = map_ordered(run, enumerate(chunk_sizes(trials)))
    return [np.concatenate([p[k] for p in parts]) for k in range(len(masks))]


def estimate_capacity(U, M, cfg, trials, stream):
    """Cap_M(U): probability a uniform-start walk meets U at some t <= M."""
    (f,) = _uniform_walk_flags([_mask(U, cfg)], M, cfg, trials, stream)
    return _bernoulli(int(f.sum()), trials, dict(M=M, size=int(len(U))))


def estimate_closeness(U, V, M, cfg, trials, stream):
    """Close_M(U, V): the walk meets both U and V by time M."""
    fu, fv = _uniform_walk_flags([_mask(U, cfg), _mask(V, cfg)], M, cfg, trials, stream)
    return _bernoulli(int((fu & fv).sum()), trials, dict(M=M))


def exact_capacity(U, M, cfg):
    """Cap_M(U) by dynamic programming over the torus (no sampling)."""
    n, d, h = cfg.n, cfg.d, cfg.laziness
    inside = _mask(U, cfg).reshape((n,) * d, order="F")
    hit = inside.astype(float)
    for _ in range(M):
        nxt = h * hit
        for ax in range(d):
            nxt += (1 - h) / (2 * d) * (np.roll(hit, 1, axis=ax) + np.roll(hit, -1, axis=ax))
        hit = np.where(inside, 1.0, nxt)
    return float(hit.mean())


def _pairs_meet(A, B, size):
    """For column-paired walks A (a, W) and B (b, W): does column w of A meet column w of B?"""
    W = A.shape[1]
    off = np.arange(W, dtype=np.int64) * size
    ea = (A + off).ravel()
    eb = B + off
    hit = np.isin(eb, ea)
    return hit.any(axis=0)


def estimate_intersection(K, L, cfg, trials, stream):
    """P(X_s = Y_t for some s <= K, t <= L); X from 0, Y from a uniform point."""
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def run(job):
        c, size = job
        rx = substream(stream, "inter-X", c)
        ry = substream(stream, "inter-Y", c)
        X = batch_walks(np.zeros(size, dtype=np.int64), K, cfg, rx)
        y0 = ry.integers(0, cfg.size, size=size, dtype=np.int64)
        Y = batch_walks(y0, L, cfg, ry)
        return int(_pairs_meet(X, Y, cfg.size).sum())

    hits = sum(map_ordered(run, enumerate(chunk_sizes(trials))))
    return _bernoulli(hits, trials, dict(K=K, L=L))


def estimate_nonintersection(m, cfg, trials, stream):
    """f_n(m) = P(X_s != X'_t for all 1 <= s, t <= m), both walks from 0."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if m == 0:
        return Estimate(1.0, 0.0, trials, dict(m=0))

    def run(job):
        c, size = job
        ra = substream(stream, "nonint-A", c)
        rb = substream(stream, "nonint-B", c)
        z = np.zeros(size, dtype=np.int64)
        A = batch_walks(z, m, cfg, ra)[1:]
        B = batch_walks(z, m, cfg, rb)[1:]
        return int((~_pairs_meet(A, B, cfg.size)).sum())

    ok = sum(map_ordered(run, enumerate(chunk_sizes(trials))))
    return _bernoulli(ok, trials, dict(m=m))


def estimate_return(ts, cfg, trials, stream, x=0):
    """P(X_t = x) for a walk from 0, for every t in ``ts`` (one shared set of walks)."""
    ts = sorted(int(t) for t in ts)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if ts and ts[0] < 0:
        raise ValueError("times must be >= 0")
    x = int(x)

    def run(job):
        c, size = job
        rng = substream(stream, "return", c)
        P = batch_walks(np.zeros(size, dtype=np.int64), ts[-1], cfg, rng)
        return np.array([int((P[t] == x).sum()) for t in ts])

    hits = np.sum(map_ordered(run, enumerate(chunk_sizes(trials))), axis=0)
    return [_bernoulli(int(h), trials, dict(t=t, x=x)) for t, h in zip(ts, hits)]


@dataclass
class LengthStats:
    L: int
    mean: float
    var: float
    stderr: float
    c_hat: float
    c_stderr: float
    trials: int
    lengths: np.ndarray = field(repr=False, default=None)


def lerw_lengths(L, cfg, trials, stream, *, lattice=False):
    """Sample |LE(X[0, L])| for ``trials`` walks (torus or, with ``lattice``, Z^d)."""
    if L < 0:
        raise ValueError("L must be >= 0")

    def run(job):
        c, size = job
        rng = substream(stream, "lerw-length", c)
        out = np.empty(size, dtype=np.int64)
        if lattice:
            for k in range(size):
                out[k] = len(lattice_erased_times(L, cfg.laziness, cfg.d, rng))
            return out
        for k in range(size):
            path = batch_walks(np.zeros(1, dtype=np.int64), L, cfg, rng)[:, 0]
            out[k] = len(_erase_dense(path, cfg.size))
        return out

    return np.concatenate(map_ordered(run, enumerate(chunk_sizes(trials))))


def lerw_length_stats(L, cfg, trials, stream, *, lattice=False):
    """Mean and variance of |LE(X[0,L])| and c_L = mean (log L)^(1/3) / L."""
    x = lerw_lengths(L, cfg, trials, stream, lattice=lattice).astype(float)
    mean = x.mean()
    var = x.var(ddof=1) if trials > 1 else 0.0
    se = math.sqrt(var / trials)
    if L >= 2:
        scale = math.log(L) ** (1 / 3) / L
        c, cse = mean * scale, se * scale
    else:
        c = cse = float("nan")
    return LengthStats(L, mean, var, se, c, cse, trials, x.astype(np.int64))


# --- calibration ----------------------------------------------------------------------

@dataclass
class Calibration:
    n: int
    theta: float
    beta: float
    r: int
    w: int
    m: int
    alpha: float
    a_n: float
    b_n: float
    gamma_n: float
    delta: float
    kill: float
    a_stderr: float = 0.0
    b_stderr: float = 0.0

    def alpha_residual(self):
        """|1/(alpha sqrt m) - (1 - (1 - kill)^r)|."""
        return abs(1 / (self.alpha * math.sqrt(self.m)) - (1 - (1 - self.kill) ** self.r))


def alpha_from_kill(kill, r, m):
    """alpha with 1/(alpha sqrt m) = 1 - (1 - kill)^r."""
    q = -math.expm1(r * math.log1p(-kill)) if kill < 1 else 1.0
    return 1.0 / (math.sqrt(m) * q)


def m_from_a(a_n, n):
    return math.floor(math.log(n) ** (2 / 11) / a_n)


def calibrate(n, theta, beta, trials, stream, *, r=None, w=None, m=None,
              d=4, laziness=0.5):
    """Estimate a_n, b_n and derive m, alpha and gamma_n.

    ``r``, ``w`` default to the asymptotic formulas; at small n they must be
    overridden (``r > 2w``), and ``m`` may be forced when the formula gives 0.
    """
    from .segments import paper_lengths
    from .wilson import torus_kill

    if n < 3:
        raise ValueError("n must be >= 3")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    r0, w0 = paper_lengths(n, theta)
    r = r0 if r is None else int(r)
    w = w0 if w is None else int(w)
    if r <= 2 * w:
        raise ValueError(f"need r > 2w, got r={r}, w={w}")
    cfg = WalkConfig(n, d, laziness)
    logn = math.log(n)

    def run(job):
        c, size = job
        rng = substream(stream, "calibrate", c)
        caps = np.empty(size)
        lens = np.empty(size)
        for k in range(size):
            path = batch_walks(np.zeros(1, dtype=np.int64), r, cfg, rng)[:, 0]
            le = path[_erase_dense(path, cfg.size)]
            lens[k] = len(le)
            caps[k] = exact_capacity(np.unique(le), r - 2 * w, cfg)
        return caps, lens

    parts = map_ordered(run, enumerate(chunk_sizes(trials)))
    caps = np.concatenate([p[0] for p in parts])
    lens = np.concatenate([p[1] for p in parts])
    sd = lambda v: float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    a_scale = logn ** (2 / 11)
    b_scale = n * n * logn ** (5 / 66)
    a_n = a_scale * caps.mean()
    b_n = lens.mean() / b_scale
    if m is None:
        m = m_from_a(a_n, n)
        if m < 1:
            raise ValueError(f"m = floor(a_n^-1 (log n)^(2/11)) = {m} < 1; override m")
    kill = torus_kill(n, beta)
    alpha = alpha_from_kill(kill, r, m)
    delta = 1 - math.sqrt(m * a_n * logn ** (-2 / 11))
    gamma = b_n * a_n ** -0.5 * (1 - delta)
    return Calibration(n, theta, beta, r, w, int(m), alpha, a_n, b_n, gamma, delta, kill,
                       a_scale * sd(caps), sd(lens) / b_scale)


# --- exact small utilities ----------------------------------------------------------------

def geometric_tail(p, m):
    """E[X 1{X > m}] for X geometric on {1, 2, ...} with success probability p."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if m < 1:
        raise ValueError("m must be >= 1")
    if p == 1:
        return 0.0
    return (1 - p) ** m * (m + 1 / p)


@dataclass
class Coupling:
    p: np.ndarray
    q: np.ndarray
    diag: np.ndarray
    disagreement: float

    def table(self, limit=4096):
        """Dense joint pmf: min(p,q) on the diagonal plus the residual product."""
        k = len(self.p)
        if k > limit:
            raise MemoryError(f"{k}x{k} table too large; use the factored form")
        t = np.diag(self.diag)
        if self.disagreement > 0:
            t += np.outer(self.p - self.diag, self.q - self.diag) / self.disagreement
        return t

    def marginals(self):
        """Row and column sums of the joint law, without building the table."""
        if self.disagreement > 0:
            return self.p.copy(), self.q.copy()
        return self.diag.copy(), self.diag.copy()

    def sample(self, size, rng):
        """Draw pairs (i, j) from the coupling."""
        same = rng.random(size) >= self.disagreement
        k = len(self.p)
        out = np.empty((size, 2), dtype=np.int64)
        if self.diag.sum() > 0:
            d = rng.choice(k, size=size, p=self.diag / self.diag.sum())
            out[same] = d[same, None]
        if self.disagreement > 0:
            rp = (self.p - self.diag) / self.disagreement
            rq = (self.q - self.diag) / self.disagreement
            n_diff = int((~same).sum())
            out[~same, 0] = rng.choice(k, size=n_diff, p=rp)
            out[~same, 1] = rng.choice(k, size=n_diff, p=rq)
        return out


def maximal_coupling(p, q, tol=1e-9):
    """Coupling of pmfs p and q maximising P(equal); disagreement = TV(p, q)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-d over the same space")
    if len(p) > 2**16:
        raise ValueError("outcome space larger than 2^16")
    for v in (p, q):
        if (v < -tol).any() or abs(v.sum() - 1) > tol:
            raise ValueError("input is not a normalised pmf")
    diag = np.minimum(p, q)
    return Coupling(p, q, diag, float(max(0.0, 1 - diag.sum())))


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def couplelem_bound(p1, p2, q1, q2):
    """sum_i |p_i - q_i| + sum_{i != j} (p_ij + q_ij) for two indicator vectors.

    ``p1[i] = P(Y_i = 1)``, ``p2[i, j] = P(Y_i = Y_j = 1)`` and likewise for Z.
    """
    p1, q1 = np.asarray(p1, float), np.asarray(q1, float)
    p2, q2 = np.asarray(p2, float), np.asarray(q2, float)
    off = ~np.eye(len(p1), dtype=bool)
    return float(np.abs(p1 - q1).sum() + p2[off].sum() + q2[off].sum())


def product_bernoulli_pmf(probs):
    """pmf over {0,1}^k (outcome index = bit pattern, bit i = coordinate i)."""
    probs = np.asarray(probs, dtype=float)
    k = len(probs)
    idx = np.arange(2**k)
    bits = (idx[:, None] >> np.arange(k)) & 1
    return np.prod(np.where(bits == 1, probs, 1 - probs), axis=1)
