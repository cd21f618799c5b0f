"""Minimal SVG histograms (rect and text emission only)."""

from xml.sax.saxutils import escape

import numpy as np


def histogram_svg(values, bins=30, title="", width=480, height=300, overlay=None):
    """SVG document with a density histogram of ``values``.

    ``overlay`` is an optional density function drawn as a polyline over the
    bars, in the same units.
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("nothing to plot")
    dens, edges = np.histogram(x, bins=bins, density=True)
    pad = 40
    w, h = width - 2 * pad, height - 2 * pad
    ys = [dens.max()]
    grid = None
    if overlay is not None:
        grid = np.linspace(edges[0], edges[-1], 200)
        curve = np.asarray(overlay(grid), dtype=float)
        ys.append(curve.max())
    top = max(ys) or 1.0
    span = (edges[-1] - edges[0]) or 1.0
    sx = lambda v: pad + (v - edges[0]) / span * w
    sy = lambda v: pad + h - v / top * h
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for d, a, b in zip(dens, edges[:-1], edges[1:]):
        out.append(f'<rect x="{sx(a):.2f}" y="{sy(d):.2f}" width="{max(sx(b) - sx(a) - 1, 0.5):.2f}" '
                   f'height="{pad + h - sy(d):.2f}" fill="#6a8caf"/>')
    if grid is not None:
        pts = " ".join(f"{sx(g):.2f},{sy(c):.2f}" for g, c in zip(grid, curve))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#c0392b" stroke-width="1.5"/>')
    out.append(f'<line x1="{pad}" y1="{pad + h}" x2="{pad + w}" y2="{pad + h}" stroke="black"/>')
    out.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{pad + h}" stroke="black"/>')
    out.append(f'<text x="{pad}" y="{pad + h + 16}" font-size="11">{edges[0]:.4g}</text>')
    out.append(f'<text x="{pad + w}" y="{pad + h + 16}" font-size="11" '
               f'text-anchor="end">{edges[-1]:.4g}</text>')
    out.append(f'<text x="{width / 2}" y="{pad / 2}" font-size="13" '
               f'text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
