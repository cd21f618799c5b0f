"""Command-line front end: ``lerwlab <subcommand> [options]``.

Every subcommand writes CSV (or JSON lines for ``segments``) whose header
block echoes the full configuration and package version.  Options may also
come from ``--config file.json``; flags given on the command line win.

Exit codes: 0 success, 1 a reproduced criterion failed, 2 invalid
configuration, 3 a step cap was exceeded (partial output is flagged).
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import CapExceeded, WalkConfig, pack_coords, unpack
from .parallel import set_threads
from .rng import substream

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --- output -------------------------------------------------------------------------------

class Output:
    """Collects a header block and rows, then writes CSV or JSON lines."""

    def __init__(self, command, config, fmt="csv"):
        self.command = command
        self.config = config
        self.fmt = fmt
        self.columns = None
        self.rows = []
        self.notes = []
        self.partial = False

    def header(self, prefix="# "):
        cfg = {k: v for k, v in sorted(self.config.items()) if k not in ("func",)}
        lines = [f"lerwlab {__version__}", f"command: {self.command}",
                 "config: " + json.dumps(cfg, sort_keys=True, default=str)]
        if self.partial:
            lines.append("status: PARTIAL (step cap exceeded)")
        lines += self.notes
        return "".join(prefix + s + "\n" for s in lines)

    def add(self, **row):
        row = {k: (v.item() if isinstance(v, np.generic) else v) for k, v in row.items()}
        if self.fmt == "csv":
            row.setdefault("seed", self.config["seed"])
            row.setdefault("trials", self.config.get("trials"))
            if self.columns is None:
                self.columns = list(row)
        self.rows.append(row)

    def text(self):
        buf = io.StringIO()
        buf.write(self.header())
        if self.fmt == "jsonl":
            for r in self.rows:
                buf.write(json.dumps(r, sort_keys=True, default=_jsonable) + "\n")
            return buf.getvalue()
        w = csv.writer(buf, lineterminator="\n")
        if self.columns:
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_cell(r.get(c)) for c in self.columns])
        return buf.getvalue()

    def write(self, out):
        text = self.text()
        if out is None:
            sys.stdout.write(text)
            return None
        path = Path(out)
        if path.suffix not in (".csv", ".jsonl", ".txt"):
            path.mkdir(parents=True, exist_ok=True)
            path = path / f"{self.command}.{'jsonl' if self.fmt == 'jsonl' else 'csv'}"
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        return path


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.ndarray, set, tuple)):
        return [_jsonable(x) if isinstance(x, (np.generic, np.ndarray)) else x for x in v]
    if isinstance(v, np.bool_):
        return bool(v)
    return str(v)


def _write_svg(path, values, title, overlay=None):
    from .svg import histogram_svg

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(histogram_svg(values, title=title, overlay=overlay))


# --- argument helpers -------------------------------------------------------------------------

def _ints(s):
    return [int(x) for x in str(s).split(",") if x != ""]


def _floats(s):
    return [float(x) for x in str(s).split(",") if x != ""]


def _graph(spec):
    """k4, complete:M, grid:RxC, cycle:M, path:M, torus:N, file:PATH (or a bare path)."""
    from .wilson import WeightedGraph

    s = str(spec)
    if s.startswith("k") and s[1:].isdigit():
        return WeightedGraph.complete_explicit(int(s[1:]))
    kind, _, arg = s.partition(":")
    try:
        if kind == "complete":
            return WeightedGraph.complete_explicit(int(arg))
        if kind == "grid":
            r, c = arg.lower().split("x")
            return WeightedGraph.grid(int(r), int(c))
        if kind == "cycle":
            return WeightedGraph.cycle(int(arg))
        if kind == "path":
            return WeightedGraph.path_graph(int(arg))
        if kind == "file":
            return WeightedGraph.read_edge_list(arg)
    except (ValueError, OSError) as e:
        raise ConfigError(f"bad graph spec {spec!r}: {e}") from e
    if Path(s).exists():
        return WeightedGraph.read_edge_list(s)
    raise ConfigError(f"unknown graph {spec!r}")


def _vertex_set(spec, cfg, rng):
    """single | all | empty | ball:R | random:K | line:K."""
    kind, _, arg = str(spec).partition(":")
    if kind == "single":
        return np.array([0])
    if kind == "all":
        return np.arange(cfg.size)
    if kind == "empty":
        return np.array([], dtype=np.int64)
    if kind == "random":
        return rng.choice(cfg.size, size=int(arg), replace=False)
    if kind == "line":
        return np.array([pack_coords([i] + [0] * (cfg.d - 1), cfg.n) for i in range(int(arg))])
    if kind == "ball":
        R = int(arg)
        c = np.stack(np.unravel_index(np.arange(cfg.size), (cfg.n,) * cfg.d, order="F"), 1)
        dist = np.minimum(c, cfg.n - c).sum(axis=1)
        return np.flatnonzero(dist <= R)
    raise ConfigError(f"unknown set {spec!r}")


# --- subcommands ------------------------------------------------------------------------------

def cmd_walk(a, out):
    from .lattice import simulate_lattice_walk, simulate_walk

    if a.lattice:
        coords = simulate_lattice_walk([0] * a.d, a.length, a.laziness, a.seed)
        for t, c in enumerate(coords):
            out.add(t=t, **{f"x{i}": int(v) for i, v in enumerate(c)})
        return
    cfg = WalkConfig(a.n, a.d, a.laziness, a.kill)
    path = simulate_walk(a.start, a.length, cfg, a.seed)
    for t, v in enumerate(path.steps):
        c = unpack(v, a.n, a.d) if v >= 0 else [-1] * a.d
        out.add(t=t, vertex=int(v), **{f"x{i}": int(x) for i, x in enumerate(c)})


def cmd_oracle(a, out):
    from . import oracles, spectral

    if a.kind in ("pt", "mixing", "green"):
        kern = spectral.SpectralKernel(a.n, a.d, a.laziness)
        if a.kind == "pt":
            for t in _ints(a.t):
                out.add(n=a.n, d=a.d, t=t, x=a.x,
                        p=spectral.transition_probability(t, a.x, kern))
        elif a.kind == "mixing":
            tau = spectral.mixing_time(kern)
            out.add(n=a.n, d=a.d, tau=tau, ratio=tau / a.n**2)
        else:
            out.add(n=a.n, d=a.d, L=a.L, x=a.x, green=spectral.green_function(a.L, a.x, kern))
        return
    g = _graph(a.graph)
    if a.kind == "count":
        out.add(graph=a.graph, vertices=g.nverts, count=oracles.matrix_tree_count(g))
    elif a.kind == "trees":
        enum = oracles.enumerate_spanning_trees(g, cap=a.cap or 10**5)
        for i, t in enumerate(enum.trees):
            out.add(tree=i, edges=" ".join(f"{u}-{v}" for u, v in t))
    elif a.kind == "pmf":
        enum = oracles.enumerate_spanning_trees(g, cap=a.cap or 10**5)
        for k, p in oracles.exact_path_length_distribution(enum, a.x, a.y).items():
            out.add(x=a.x, y=a.y, vertices=k, probability=p)
    else:
        raise ConfigError(f"unknown oracle kind {a.kind!r}")


def cmd_lerw(a, out):
    from . import estimators
    from .crt import ks_rayleigh
    from .looperase import estimate_retention
    from .wilson import lerw_lengths_torus

    cap = a.cap or 10**9
    if a.mode == "retention":
        for k in _ints(a.k):
            e = estimate_retention(k, a.horizon, a.trials, a.seed, d=a.d, laziness=a.laziness)
            out.add(k=k, horizon=e.params["horizon"], value=e.value, stderr=e.stderr)
        return
    if a.mode == "torus":
        x = lerw_lengths_torus(a.n, a.trials, a.seed, d=a.d, laziness=a.laziness, cap=cap)
        D, s = ks_rayleigh(x)
        out.notes.append(f"rayleigh fit sigma={s!r} ks={D!r}")
        for i, v in enumerate(x):
            out.add(trial=i, n=a.n, length=int(v))
        if a.svg:
            _write_svg(a.svg, x / s, f"LERW x->y length / sigma, n={a.n}",
                       overlay=lambda z: z * np.exp(-z * z / 2))
        return
    cfg = WalkConfig(a.n, a.d, a.laziness)
    for L in _ints(a.L):
        st = estimators.lerw_length_stats(L, cfg, a.trials, a.seed, lattice=a.lattice)
        out.add(L=L, lattice=a.lattice, mean=st.mean, var=st.var, stderr=st.stderr,
                c_hat=st.c_hat, c_stderr=st.c_stderr)
        if a.svg:
            _write_svg(a.svg, st.lengths, f"|LE(X[0,{L}])|")


def cmd_segments(a, out):
    from .lattice import batch_walks
    from .segments import decompose, make_plan

    import warnings

    cfg = WalkConfig(a.n, a.d, a.laziness)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = make_plan(a.T, a.r, a.w, a.tau, faithful=a.faithful)
    for trial in range(a.trials):
        rng = substream(a.seed, "segments", trial)
        x = batch_walks(np.zeros(1, dtype=np.int64), a.T, cfg, rng)[:, 0]
        dec = decompose(x, plan)
        st = dec.state
        out.add(trial=trial, good=dec.report.is_good,
                flags={k: v for k, v in dec.report.flags.items() if v is not None},
                survivors=sorted(int(s) for s in st.final), J=sorted(int(j) for j in st.J),
                N=[int(v) for v in st.N] if st.N is not None else None,
                violations=len(dec.violations))


def cmd_ust(a, out):
    from . import oracles
    from .wilson import (WeightedGraph, lerw_sizes, tree_keys, tree_path_sizes,
                         wilson_ust, wilson_ust_many)

    kind, _, arg = str(a.graph).partition(":")
    if kind == "torus":
        g = WeightedGraph.torus(int(arg), a.beta, d=a.d, laziness=a.laziness)
        for trial in range(a.trials):
            rng = substream(a.seed, "ust-torus", trial)
            tree = wilson_ust(g, stream=rng, budget=a.cap or 10**9)
            depth = tree.depth()
            out.add(trial=trial, root=g.external(tree.root), mean_depth=float(depth.mean()),
                    max_depth=int(depth.max()))
        return
    g = _graph(a.graph)
    if a.x is not None and a.y is not None:
        if a.lerw:
            sizes = lerw_sizes(g, a.x, a.y, a.trials, a.seed)
        else:
            sizes = tree_path_sizes(wilson_ust_many(g, a.trials, a.seed), a.x, a.y)
        vals, cnt = np.unique(sizes, return_counts=True)
        for v, c in zip(vals, cnt):
            out.add(x=a.x, y=a.y, vertices=int(v), count=int(c))
        if a.svg:
            _write_svg(a.svg, sizes, f"x-y path vertices on {a.graph}")
        return
    parents = wilson_ust_many(g, a.trials, a.seed)
    counts = {}
    for k in tree_keys(parents, 0):
        counts[k] = counts.get(k, 0) + 1
    try:
        enum = oracles.enumerate_spanning_trees(g, cap=a.cap or 10**5)
        keys = enum.trees
    except CapExceeded:
        keys = sorted(counts)
    for k in keys:
        out.add(edges=" ".join(f"{u}-{v}" for u, v in k), count=counts.get(k, 0))
    if len(keys) >= 2:
        stat, p = oracles.chi_square_uniformity([counts.get(k, 0) for k in keys])
        out.notes.append(f"chi2={stat!r} p={p!r}")


def cmd_estimate(a, out):
    from . import estimators

    cfg = WalkConfig(a.n, a.d, a.laziness)
    rng = substream(a.seed, "estimate-sets")
    q = a.quantity
    if q == "capacity":
        U = _vertex_set(a.set, cfg, rng)
        for M in _ints(a.M):
            e = estimators.estimate_capacity(U, M, cfg, a.trials, a.seed)
            out.add(n=a.n, M=M, set=a.set, value=e.value, stderr=e.stderr)
    elif q == "closeness":
        U = _vertex_set(a.set, cfg, rng)
        V = _vertex_set(a.set2 or a.set, cfg, rng)
        for M in _ints(a.M):
            e = estimators.estimate_closeness(U, V, M, cfg, a.trials, a.seed)
            out.add(n=a.n, M=M, set=a.set, set2=a.set2, value=e.value, stderr=e.stderr)
    elif q == "intersection":
        for K in _ints(a.K):
            L = a.L if a.L is not None else K
            e = estimators.estimate_intersection(K, int(L), cfg, a.trials, a.seed)
            out.add(n=a.n, K=K, L=int(L), value=e.value, stderr=e.stderr)
    elif q == "nonintersection":
        for m in _ints(a.m):
            e = estimators.estimate_nonintersection(m, cfg, a.trials, a.seed)
            out.add(n=a.n, m=m, value=e.value, stderr=e.stderr)
    elif q == "return":
        for e in estimators.estimate_return(_ints(a.t), cfg, a.trials, a.seed):
            out.add(n=a.n, t=e.params["t"], value=e.value, stderr=e.stderr)
    elif q == "calibrate":
        c = estimators.calibrate(a.n, a.theta, a.beta, a.trials, a.seed, r=a.r, w=a.w,
                                 m=a.m_override, d=a.d, laziness=a.laziness)
        for key in ("a_n", "b_n", "gamma_n", "m", "alpha", "delta", "kill", "r", "w"):
            err = {"a_n": c.a_stderr, "b_n": c.b_stderr}.get(key, 0.0)
            out.add(n=a.n, theta=a.theta, beta=a.beta, quantity=key,
                    value=float(getattr(c, key)), stderr=err)
    elif q == "geometric-tail":
        for p in _floats(a.p):
            out.add(p=p, m=a.m_tail, value=estimators.geometric_tail(p, a.m_tail), stderr=0.0)
    else:
        raise ConfigError(f"unknown quantity {q!r}")


def cmd_crt(a, out):
    from .crt import rayleigh_survival, sample_crt_matrices

    if a.survival is not None:
        out.add(x=a.survival, survival=rayleigh_survival(a.survival))
        return
    D = sample_crt_matrices(a.k, a.trials, a.seed)
    iu = np.triu_indices(a.k, 1)
    for t, m in enumerate(D):
        out.add(trial=t, **{f"d{i + 1}_{j + 1}": float(m[i, j]) for i, j in zip(*iu)})
    if a.svg:
        _write_svg(a.svg, D[:, 0, 1], f"d(z1,z2), k={a.k}",
                   overlay=lambda z: z * np.exp(-z * z / 2))


def cmd_reproduce(a, out):
    from .reproduce import CRITERIA, criterion_11, run_criterion

    ids = list(CRITERIA) + [11] if a.criterion == "all" else [int(a.criterion)]
    bad = [i for i in ids if i not in CRITERIA and i != 11]
    if bad:
        raise ConfigError(f"unknown criterion {bad[0]}; choose 1..11 or all")
    ok = True
    done = {}
    other = 2 if a.threads != 2 else 1
    for i in ids:
        if i == 11:
            res = criterion_11(a.seed, baseline=done or None, ids=list(done) or None,
                               threads=(a.threads, other))
        else:
            res = done[i] = run_criterion(i, a.seed)
        print(res.line(), file=sys.stderr)
        out.notes += [f"C{i}: {note}" for note in res.notes]
        out.notes.append(f"C{i}: {'PASS' if res.passed else 'FAIL'}")
        for r in res.rows:
            out.add(criterion=i, data=json.dumps(r, sort_keys=True))
        ok &= res.passed
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "walk": cmd_walk, "oracle": cmd_oracle, "lerw": cmd_lerw, "segments": cmd_segments,
    "ust": cmd_ust, "estimate": cmd_estimate, "crt": cmd_crt, "reproduce": cmd_reproduce,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=None, help="output file or directory (default stdout)")
    common.add_argument("--config", default=None, help="JSON file of option values")
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--svg", default=None, help="write an SVG histogram here")
    common.add_argument("--cap", type=int, default=None, help="step or enumeration cap")

    torus = argparse.ArgumentParser(add_help=False)
    torus.add_argument("--n", type=int, default=8)
    torus.add_argument("--d", type=int, default=4)
    torus.add_argument("--laziness", type=float, default=0.5)

    p = argparse.ArgumentParser(prog="lerwlab", description="Loop-erased walk experiments.")
    p.add_argument("--version", action="version", version=f"lerwlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("walk", parents=[common, torus], help="sample one walk path")
    s.add_argument("--length", type=int, default=100)
    s.add_argument("--start", type=int, default=0)
    s.add_argument("--kill", type=float, default=0.0)
    s.add_argument("--lattice", action="store_true")

    s = sub.add_parser("oracle", parents=[common, torus], help="exact values")
    s.add_argument("kind", choices=["pt", "mixing", "green", "count", "trees", "pmf"])
    s.add_argument("--t", default="1")
    s.add_argument("--x", type=int, default=0)
    s.add_argument("--y", type=int, default=0)
    s.add_argument("--L", type=int, default=0)
    s.add_argument("--graph", default="k4")

    s = sub.add_parser("lerw", parents=[common, torus], help="LERW lengths and retention")
    s.add_argument("--mode", choices=["lengths", "torus", "retention"], default="lengths")
    s.add_argument("--L", default="1000")
    s.add_argument("--lattice", action="store_true")
    s.add_argument("--k", default="100")
    s.add_argument("--horizon", type=int, default=None)

    s = sub.add_parser("segments", parents=[common, torus], help="good-walk reports (JSON lines)")
    s.add_argument("--T", type=int, default=640)
    s.add_argument("--r", type=int, default=64)
    s.add_argument("--w", type=int, default=16)
    s.add_argument("--tau", type=int, default=8)
    s.add_argument("--faithful", action="store_true")

    s = sub.add_parser("ust", parents=[common, torus], help="spanning-tree sampling")
    s.add_argument("--graph", default="k4",
                   help="k4, complete:M, grid:RxC, cycle:M, path:M, torus:N, file:PATH")
    s.add_argument("--x", type=int, default=None)
    s.add_argument("--y", type=int, default=None)
    s.add_argument("--lerw", action="store_true", help="x-y law from LERW instead of trees")
    s.add_argument("--beta", type=float, default=None)

    s = sub.add_parser("estimate", parents=[common, torus], help="Monte Carlo estimators")
    s.add_argument("quantity", choices=["capacity", "closeness", "intersection",
                                        "nonintersection", "return", "calibrate",
                                        "geometric-tail"])
    s.add_argument("--M", default="0")
    s.add_argument("--set", default="single", help="single, all, empty, ball:R, random:K, line:K")
    s.add_argument("--set2", default=None)
    s.add_argument("--K", default="0")
    s.add_argument("--L", type=int, default=None)
    s.add_argument("--m", default="0")
    s.add_argument("--t", default="1")
    s.add_argument("--theta", type=float, default=0.04)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--r", type=int, default=None)
    s.add_argument("--w", type=int, default=None)
    s.add_argument("--m-override", dest="m_override", type=int, default=None)
    s.add_argument("--p", default="0.5")
    s.add_argument("--m-tail", dest="m_tail", type=int, default=1)

    s = sub.add_parser("crt", parents=[common], help="continuum random tree samples")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--survival", type=float, default=None)

    s = sub.add_parser("reproduce", parents=[common], help="run acceptance criteria")
    s.add_argument("criterion", help="1..11 or all")
    return p


def _explicit_dests(parser, argv):
    """Option dests the user actually typed."""
    sub = None
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for tok in argv:
                if tok in action.choices:
                    sub = action.choices[tok]
                    break
    out = set()
    if sub is None:
        return out
    for tok in argv:
        key = tok.split("=", 1)[0]
        act = sub._option_string_actions.get(key)
        if act is not None:
            out.add(act.dest)
    return out


def parse(argv):
    parser = build_parser()
    a = parser.parse_args(argv)
    if a.config:
        try:
            cfg = json.loads(Path(a.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {a.config}: {e}") from e
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        typed = _explicit_dests(parser, argv)
        for k, v in cfg.items():
            k = k.replace("-", "_")
            if not hasattr(a, k):
                raise ConfigError(f"unknown config key {k!r}")
            if k not in typed:
                setattr(a, k, v)
    if a.trials < 1:
        raise ConfigError("trials must be >= 1")
    if a.threads < 1:
        raise ConfigError("threads must be >= 1")
    if a.seed is None or a.seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return a


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        a = parse(argv)
    except ConfigError as e:
        print(f"lerwlab: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as e:
        return int(e.code or 0)
    set_threads(a.threads)
    config = {k: v for k, v in vars(a).items() if k not in ("config",)}
    out = Output(a.command, config, "jsonl" if a.command == "segments" else "csv")
    code = EXIT_OK
    try:
        code = COMMANDS[a.command](a, out) or EXIT_OK
    except CapExceeded as e:
        out.partial = True
        out.notes.append(f"error: {e}")
        print(f"lerwlab: {e}", file=sys.stderr)
        code = EXIT_CAP
    except (ConfigError, ValueError, TypeError, IndexError, OverflowError) as e:
        print(f"lerwlab: invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    path = out.write(a.out)
    if path is not None:
        print(f"wrote {path}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
