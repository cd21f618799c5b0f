"""Build partial spanning trees on the killed torus and check the bounds.

Each trial runs Wilson's algorithm from three uniform starts.  When the
trial is good (event G), the label-count bounds and the distance
comparison are checked; the tally of checks and violations is printed.
"""

import sys

from lerwlab.rng import substream
from lerwlab.wilson import WeightedGraph, classify_multiwalk, partial_tree


def main(trials=2000, n=16, k=3, r=66, w=16, tau=8, beta=0.2, seed=3):
    g = WeightedGraph.torus(n, beta, laziness=0.0)
    good = walks_good = pairs = 0
    bad = {"label": 0, "walk": 0, "dist": 0, "inf": 0}
    for t in range(trials):
        rng = substream(seed, "demo", t)
        starts = rng.integers(0, g.nverts, k).tolist()
        if len(set(starts)) < k:
            continue
        rep = classify_multiwalk(partial_tree(g, starts, r, rng), r, w, tau)
        walks_good += rep.walks_good
        if rep.G:
            good += 1
            pairs += len(rep.checks["pairs"])
            for key in bad:
                bad[key] += len(rep.checks[key])
    print(f"n={n} k={k} r={r} w={w} tau={tau} beta={beta}")
    print(f"trials {trials}: all walks good {walks_good}, event G {good}, pairs checked {pairs}")
    print("violations:", bad)


if __name__ == "__main__":
    main(trials=int(sys.argv[1]) if len(sys.argv) > 1 else 2000)
