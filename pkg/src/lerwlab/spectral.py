"""Exact transition probabilities and Green's functions on the torus.

The lazy walk on Z^d_n is diagonalised by the characters
``x -> exp(2 pi i k.x / n)`` with eigenvalues

    lam(k) = h + (1 - h)/d * sum_i cos(2 pi k_i / n),

so ``p_t(0, x) = n^-d sum_k lam(k)^t cos(2 pi k.x / n)``.  Whole rows are
evaluated with an inverse FFT; single entries use the direct sum.
"""

from dataclasses import dataclass, field

import numpy as np

from .lattice import TorusPoint, WalkPath, unpack


@dataclass(frozen=True)
class SpectralKernel:
    n: int
    d: int = 4
    laziness: float = 0.5
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("torus side n must be >= 3")
        if self.d < 1:
            raise ValueError("dimension d must be >= 1")
        if not 0 <= self.laziness < 1:
            raise ValueError("laziness must lie in [0, 1)")
        c = np.cos(2 * np.pi * np.arange(self.n) / self.n)
        lam = np.zeros((self.n,) * self.d)
        for i in range(self.d):
            shape = [1] * self.d
            shape[i] = self.n
            lam = lam + c.reshape(shape)
        lam = self.laziness + (1 - self.laziness) / self.d * lam
        lam.flags.writeable = False
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def size(self):
        return self.n**self.d


def _coords(x, kernel):
    if isinstance(x, TorusPoint):
        if x.n != kernel.n or x.d != kernel.d:
            raise ValueError("point does not live on this torus")
        return np.array(x.coords)
    if np.ndim(x) == 0:
        return np.array(unpack(x, kernel.n, kernel.d))
    return np.asarray(x, dtype=np.int64) % kernel.n


def transition_probability(t, x, kernel):
    """p_t(0, x) by the direct eigen-sum."""
    if t < 0:
        raise ValueError("t must be >= 0")
    c = _coords(x, kernel)
    grids = np.meshgrid(*[np.arange(kernel.n)] * kernel.d, indexing="ij")
    phase = sum(g * ci for g, ci in zip(grids, c))
    val = np.sum(kernel.eigenvalues**t * np.cos(2 * np.pi * phase / kernel.n))
    return float(min(max(val / kernel.size, 0.0), 1.0))


def transition_row(t, kernel):
    """The whole row p_t(0, .) as an array of shape (n,)*d."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return np.fft.ifftn(kernel.eigenvalues ** int(t)).real


def sup_distance(t, kernel):
    """n^d * max_x |p_t(0, x) - n^-d|."""
    return float(np.abs(transition_row(t, kernel) * kernel.size - 1).max())


def mixing_time(kernel):
    """Smallest t with max_x |p_t(0,x) - n^-d| <= n^-d / 2."""
    hi = 1
    while sup_distance(hi, kernel) > 0.5:
        hi *= 2
    lo = hi // 2
    # invariant: lo fails (or is 0 and untested), hi passes
    if lo == 0:
        return 0 if sup_distance(0, kernel) <= 0.5 else 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sup_distance(mid, kernel) <= 0.5:
            hi = mid
        else:
            lo = mid
    return hi


def green_row(L, kernel):
    """G_L(x) = sum_{t<=L} p_t(0, x) for every x."""
    if L < 0:
        raise ValueError("L must be >= 0")
    lam = kernel.eigenvalues
    one = np.isclose(lam, 1.0, rtol=0, atol=1e-15)
    safe = np.where(one, 0.5, lam)
    geo = np.where(one, L + 1.0, (1 - safe ** (L + 1)) / (1 - safe))
    return np.fft.ifftn(geo).real


def green_function(L, x, kernel):
    return float(green_row(L, kernel)[tuple(_coords(x, kernel))])


def dn_statistic(path, kernel):
    """D_n = sum_{t=0}^{n} G_n(X_t - X_0)."""
    n = kernel.n
    steps = path.steps if isinstance(path, WalkPath) else np.asarray(path)
    if len(steps) < n + 1:
        raise ValueError(f"path needs at least {n + 1} vertices")
    if (steps[: n + 1] < 0).any():
        raise ValueError("D_n is defined for torus vertices only")
    g = green_row(n, kernel)
    c = np.stack([(steps[: n + 1] // n**i) % n for i in range(kernel.d)], axis=-1)
    rel = (c - c[0]) % n
    return float(g[tuple(rel.T)].sum())
