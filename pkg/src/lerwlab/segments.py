"""Segment decomposition of a walk and its loop erasure.

A walk ``X[0, T]`` is cut into windows ``A_j = {(j-1)r, ..., jr-1}`` for
``j = 1..l`` with ``l = floor(T/r) + 1``; ``A'_j`` drops ``w`` times from
each end.  Windows are clipped to ``[0, T]`` because the walk has no
vertices past ``T``.

Indices here are 1-based for segments, matching the bookkeeping in the
survivor recursion; index 0 stands for the root.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lattice import ROOT, WalkPath
from .looperase import loop_erase, local_cutpoints, retained_times


@dataclass(frozen=True)
class SegmentPlan:
    T: int
    r: int
    w: int
    tau: int
    theta: float = None
    faithful: bool = False

    @property
    def ell(self):
        return self.T // self.r + 1

    def window(self, j):
        """A_j clipped to [0, T], as an inclusive (lo, hi) pair."""
        self._check(j)
        return (j - 1) * self.r, min(j * self.r - 1, self.T)

    def interior(self, j):
        """A'_j clipped to [0, T]; empty windows come back with lo > hi."""
        self._check(j)
        return (j - 1) * self.r + self.w, min(j * self.r - self.w - 1, self.T)

    def margin_mask(self, j):
        """Boolean mask over the times of A_j marking A_j minus A'_j."""
        lo, hi = self.window(j)
        t = np.arange(lo, hi + 1)
        a, b = self.interior(j)
        return (t < a) | (t > b)

    def _check(self, j):
        if not 1 <= j <= self.ell:
            raise IndexError(f"segment {j} outside 1..{self.ell}")


def make_plan(T, r, w, tau, *, theta=None, faithful=False):
    if T < 0:
        raise ValueError("T must be >= 0")
    if w < 1 or r <= 2 * w:
        raise ValueError(f"need r > 2w >= 2, got r={r}, w={w}")
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if w < 2 * tau:
        if faithful:
            raise ValueError(f"w={w} < 2 tau={2 * tau}")
        warnings.warn(f"desk-scale plan: w={w} < 2 tau={2 * tau}", stacklevel=2)
    return SegmentPlan(int(T), int(r), int(w), int(tau), theta, faithful)


def paper_lengths(n, theta):
    """(r, w) from r = floor(n^2 (log n)^(9/22)), w = floor(n^2 (log n)^theta)."""
    L = math.log(n)
    return math.floor(n * n * L ** (9 / 22)), math.floor(n * n * L**theta)


def paper_plan(n, theta, T, *, d=4, laziness=0.5, tau=None, faithful=True):
    r, w = paper_lengths(n, theta)
    if tau is None:
        from .spectral import SpectralKernel, mixing_time

        if n**d > 10**6:
            raise ValueError("torus too large for the exact mixing time; pass tau")
        tau = mixing_time(SpectralKernel(n, d, laziness))
    return make_plan(T, r, w, tau, theta=theta, faithful=faithful)


def _ids(path):
    return path.steps if isinstance(path, WalkPath) else np.asarray(path, dtype=np.int64)


def _codes(arrays):
    """Map the vertices of several arrays to dense codes (ROOT -> -1)."""
    allv = np.concatenate([a for a in arrays if len(a)] or [np.zeros(0, np.int64)])
    uniq = np.unique(allv[allv != ROOT])
    out = []
    for a in arrays:
        c = np.searchsorted(uniq, a)
        c[a == ROOT] = -1
        out.append(c)
    return out, len(uniq)


def _incidence(codes, size):
    inc = np.zeros((len(codes), size), dtype=bool)
    for i, c in enumerate(codes):
        inc[i, c[c >= 0]] = True
    return inc


def _meets(a, b):
    """Boolean matrix M[i, j]: row set i of ``a`` meets row set j of ``b``."""
    return (a.astype(np.float32) @ b.T.astype(np.float32)) > 0


def _common_times(x, lo1, hi1, lo2, hi2, mask2=None):
    """Some (s, t) with s in [lo1, hi1], t in [lo2, hi2] and X_s = X_t."""
    t_range = np.arange(lo2, hi2 + 1)
    if mask2 is not None:
        t_range = t_range[mask2]
    a = x[lo1 : hi1 + 1]
    hit = np.isin(x[t_range], a[a != ROOT])
    if not hit.any():
        return None
    t = int(t_range[np.argmax(hit)])
    s = lo1 + int(np.flatnonzero(a == x[t])[0])
    return s, t


# --- good walks -----------------------------------------------------------------

@dataclass
class GoodWalkReport:
    flags: dict = field(default_factory=dict)

    @property
    def is_good(self):
        return all(v is None for v in self.flags.values())

    def validate(self, path, plan):
        """Re-check every witness against the path; True when all hold."""
        x = _ids(path)
        for name, wit in self.flags.items():
            if wit is not None and not _witness_holds(name, wit, x, plan):
                return False
        return True


def cutpoint_times(x, k):
    """k-local cutpoints of X[0, T] with both windows clipped to [0, T]."""
    pad = -2 - np.arange(k, dtype=np.int64)
    padded = np.concatenate([pad, x, pad - k])
    return local_cutpoints(padded, k) - k


def _first_gap(cuts, T, w):
    """Start of some [t, t+w], 0 <= t <= T-w, holding no element of ``cuts``."""
    if T < w:
        return None
    # gaps between consecutive cutpoints, with sentinels at -1 and T+1
    c = np.concatenate([[-1], cuts, [T + 1]])
    gaps = np.diff(c)
    bad = np.flatnonzero(gaps > w + 1)
    for b in bad:
        t = int(c[b] + 1)
        if t <= T - w:
            return t
    return None


def _long_loop(x, lo, hi, span):
    """Some s < t in [lo, hi] with X_s = X_t and t - s >= span."""
    seg = x[lo : hi + 1]
    _, first, inv = np.unique(seg, return_index=True, return_inverse=True)
    gap = np.arange(len(seg)) - first[inv.ravel()]
    t = int(np.argmax(gap))
    if gap[t] >= span:
        return lo + t - int(gap[t]), lo + t
    return None


def classify_good(path, plan):
    """Evaluate B1..B5 for X[0, T]; each set flag holds a witness tuple."""
    x = _ids(path)
    if len(x) != plan.T + 1:
        raise ValueError("plan was made for a walk of a different length")
    ell, span = plan.ell, 2 * plan.tau
    flags = {}

    cuts = cutpoint_times(x, span)
    t = _first_gap(cuts, plan.T, plan.w)
    flags["B1"] = None if t is None else (t,)

    flags["B2"] = None
    for j in range(1, ell):
        lo = plan.window(j)[0]
        hi = plan.window(j + 1)[1]
        hit = _long_loop(x, lo, hi, span)
        if hit is not None:
            flags["B2"] = (j,) + hit
            break

    segs = [x[slice(lo, hi + 1)] for lo, hi in map(plan.window, range(1, ell + 1))]
    margins = [s[plan.margin_mask(j + 1)] for j, s in enumerate(segs)]
    codes, size = _codes(segs + margins)
    inc = _incidence(codes[:ell], size)
    inc_m = _incidence(codes[ell:], size)
    meet = _meets(inc, inc)
    far = np.abs(np.subtract.outer(np.arange(ell), np.arange(ell))) >= 2
    mf = meet & far

    flags["B3"] = None
    for i in range(ell):
        js = np.flatnonzero(mf[i])
        if len(js) >= 2:
            flags["B3"] = (i + 1, int(js[0]) + 1, int(js[1]) + 1)
            break

    flags["B4"] = None
    m4 = _meets(inc, inc_m) & far
    if m4.any():
        i, j = (int(v) for v in np.argwhere(m4)[0])
        lo1, hi1 = plan.window(i + 1)
        lo2, hi2 = plan.window(j + 1)
        s, t = _common_times(x, lo1, hi1, lo2, hi2, plan.margin_mask(j + 1))
        flags["B4"] = (i + 1, j + 1, s, t)

    flags["B5"] = None
    for j in range(1, ell - 1):
        if mf[j - 1, ell - 1]:
            lo1, hi1 = plan.window(j)
            lo2, hi2 = plan.window(ell)
            flags["B5"] = (j,) + _common_times(x, lo1, hi1, lo2, hi2)
            break
    return GoodWalkReport(flags)


def _witness_holds(name, wit, x, plan):
    if name == "B1":
        (t,) = wit
        cuts = cutpoint_times(x, 2 * plan.tau)
        return 0 <= t <= plan.T - plan.w and not ((cuts >= t) & (cuts <= t + plan.w)).any()
    if name == "B2":
        j, s, t = wit
        lo, hi = plan.window(j)[0], plan.window(j + 1)[1]
        return lo <= s and t <= hi and t - s >= 2 * plan.tau and x[s] == x[t]
    if name == "B3":
        i, j, k = wit
        def meet(a, b):
            lo1, hi1 = plan.window(a)
            lo2, hi2 = plan.window(b)
            return _common_times(x, lo1, hi1, lo2, hi2) is not None
        return (len({i, j, k}) == 3 and abs(i - j) >= 2 and abs(i - k) >= 2
                and meet(i, j) and meet(i, k))
    if name == "B4":
        i, j, s, t = wit
        lo1, hi1 = plan.window(i)
        lo2, hi2 = plan.window(j)
        a, b = plan.interior(j)
        return (abs(i - j) >= 2 and lo1 <= s <= hi1 and lo2 <= t <= hi2
                and not a <= t <= b and x[s] == x[t])
    if name == "B5":
        j, s, t = wit
        return (j <= plan.ell - 2 and plan.window(j)[0] <= s <= plan.window(j)[1]
                and plan.window(plan.ell)[0] <= t and x[s] == x[t])
    raise KeyError(name)


# --- indicators and survivors ------------------------------------------------------

@dataclass
class SurvivorState:
    I: np.ndarray
    S: list = None
    J: set = None
    N: np.ndarray = None
    mode: str = "walk"

    @property
    def ell(self):
        return self.I.shape[0] - 1

    @property
    def final(self):
        return self.S[-1]


def split_segments(path, plan):
    x = _ids(path)
    return [x[lo : hi + 1] for lo, hi in map(plan.window, range(1, plan.ell + 1))]


def interior_segments(path, plan):
    x = _ids(path)
    out = []
    for j in range(1, plan.ell + 1):
        a, b = plan.interior(j)
        out.append(x[a : b + 1] if a <= b else x[:0])
    return out


def indicator_matrix(segments, targets=None, adjacent=None):
    """I[i, j] = 1 iff LE(seg_i) meets target_j (root excluded), for i < j
    not adjacent.  Row and column 0 are left for the root and stay zero.

    ``adjacent(i, j)`` defaults to ``j == i + 1`` (a single walk).
    """
    ell = len(segments)
    if targets is None:
        targets = segments
    erased = [loop_erase(np.asarray(s)).vertices if len(s) else s for s in segments]
    codes, size = _codes(list(erased) + list(targets))
    le_inc = _incidence(codes[:ell], size)
    tg_inc = _incidence(codes[ell:], size)
    hit = _meets(le_inc, tg_inc)
    I = np.zeros((ell + 1, ell + 1), dtype=np.int8)
    for i in range(1, ell + 1):
        for j in range(i + 1, ell + 1):
            near = adjacent(i, j) if adjacent is not None else j == i + 1
            if not near and hit[i - 1, j - 1]:
                I[i, j] = 1
    return I


def intersection_indicators(segments, plan=None, *, interior=False, path=None):
    """Indicator state for one walk's segments.

    ``interior=True`` tests hits against the A'_j windows instead of A_j
    (needs ``plan`` and ``path``).
    """
    targets = None
    if interior:
        if plan is None or path is None:
            raise ValueError("interior mode needs the plan and the path")
        targets = interior_segments(path, plan)
    return SurvivorState(indicator_matrix(segments, targets))


def survivors(state, ell=None, mode="walk"):
    """Run the survivor recursion and fill S_0.. and J.

    ``mode="walk"``: S_j for j < l, J = J_{l-1} + {l}.
    ``mode="tree"``: S_j for j <= l, J = J_l including root hits.
    """
    I = state.I
    if ell is None:
        ell = I.shape[0] - 1
    last = ell - 1 if mode == "walk" else ell
    S = [{0}]
    for j in range(1, last + 1):
        prev = S[-1]
        keep = {k for k in prev
                if not any(I[i, j] for i in prev if 1 <= i <= k)}
        S.append(keep | {j})
    if mode == "walk":
        J = _J(I, ell - 1, lo=1) | {ell}
    elif mode == "tree":
        J = _J(I, ell, lo=0)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return SurvivorState(I, S, J, state.N, mode)


def _J(I, upto, lo):
    sub = I[lo : upto + 1, lo : upto + 1].astype(bool)
    involved = sub.any(axis=0) | sub.any(axis=1)
    return {lo + int(k) for k in np.flatnonzero(involved)}


# --- labels --------------------------------------------------------------------

def segment_labels(path, plan, erased=None, *, exclude_last=False):
    """Counts N_j = |W(0,T) n A_j| and the label path P'.

    Returns ``(N, edges)``; ``N[0]`` is 0 and ``edges`` is the set of label
    pairs ``(i, j)``, ``i != j``, that sit next to each other along LE(X[0,T]).
    With ``exclude_last`` the final retained time (the hitting point of a
    Wilson branch) is dropped before counting.
    """
    x = _ids(path)
    times = erased.retained_times if erased is not None else retained_times(x)
    if exclude_last:
        times = times[:-1]
    lab = times // plan.r + 1
    N = np.bincount(lab, minlength=plan.ell + 1)[: plan.ell + 1]
    edges = {(int(a), int(b)) for a, b in zip(lab[:-1], lab[1:]) if a != b}
    return N, edges


def pathprop_violations(N, le_lengths, S, J, w, ell):
    """List the (j, rule) pairs where the N_j bounds fail."""
    bad = []
    for j in range(1, ell + 1):
        L = le_lengths[j]
        if j in J:
            if not 0 <= N[j] <= L + 2 * w:
                bad.append((j, "J"))
        elif j in S:
            if abs(N[j] - L) > 2 * w:
                bad.append((j, "S-J"))
        elif N[j] != 0:
            bad.append((j, "not S, not J"))
    return bad


@dataclass
class WalkDecomposition:
    plan: SegmentPlan
    report: GoodWalkReport
    state: SurvivorState
    le_lengths: np.ndarray
    edges: set
    violations: list


def decompose(path, plan, *, exclude_last=False):
    """Classify, build indicators/survivors/labels and check the N_j bounds."""
    report = classify_good(path, plan)
    segs = split_segments(path, plan)
    state = survivors(intersection_indicators(segs), plan.ell, "walk")
    erased = loop_erase(_ids(path))
    N, edges = segment_labels(path, plan, erased, exclude_last=exclude_last)
    state.N = N
    le_len = np.zeros(plan.ell + 1, dtype=np.int64)
    for j, s in enumerate(segs, 1):
        le_len[j] = len(loop_erase(s))
    bad = pathprop_violations(N, le_len, state.final, state.J, plan.w, plan.ell) \
        if report.is_good else []
    return WalkDecomposition(plan, report, state, le_len, edges, bad)
