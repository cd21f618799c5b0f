"""Normalised LERW lengths between random torus points against Rayleigh.

For each n the lengths are divided by their fitted Rayleigh scale; the KS
distance should drift down slowly as n grows.  Writes one SVG per n.
"""

import sys
from pathlib import Path

import numpy as np

from lerwlab.crt import ks_rayleigh
from lerwlab.svg import histogram_svg
from lerwlab.wilson import lerw_lengths_torus


def main(ns=(6, 10, 14), samples=3000, seed=2, outdir="demo_out"):
    out = Path(outdir)
    out.mkdir(exist_ok=True)
    for n in ns:
        x = lerw_lengths_torus(n, samples, (seed, n)).astype(float)
        D, s = ks_rayleigh(x)
        print(f"n={n:3d}  mean |LE| = {x.mean():8.1f}  scale = {s:8.1f}  KS = {D:.4f}")
        dens = lambda z: z * np.exp(-z * z / 2)
        (out / f"rayleigh_n{n}.svg").write_text(
            histogram_svg(x / s, title=f"|LE| / scale, n = {n}", overlay=dens))
    print(f"histograms in {out}/")


if __name__ == "__main__":
    main(samples=int(sys.argv[1]) if len(sys.argv) > 1 else 3000)
