"""Compare three laws of the corner-to-corner path on a small grid.

The exact law comes from listing every spanning tree.  Wilson's algorithm
and a direct loop-erased walk should both reproduce it.
"""

from lerwlab.oracles import (empirical_pmf, enumerate_spanning_trees,
                             exact_path_length_distribution, total_variation_pmf)
from lerwlab.wilson import WeightedGraph, lerw_sizes, tree_path_sizes, wilson_ust_many


def main(rows=3, cols=3, samples=50000, seed=1):
    g = WeightedGraph.grid(rows, cols)
    x, y = 0, rows * cols - 1
    enum = enumerate_spanning_trees(g)
    exact = exact_path_length_distribution(enum, x, y)
    wil = empirical_pmf(tree_path_sizes(wilson_ust_many(g, samples, seed), x, y))
    le = empirical_pmf(lerw_sizes(g, x, y, samples, seed + 1))
    print(f"{rows}x{cols} grid, {enum.count} spanning trees, path {x} -> {y}")
    print(f"{'vertices':>8} {'exact':>8} {'wilson':>8} {'lerw':>8}")
    for k in sorted(set(exact) | set(wil) | set(le)):
        print(f"{k:>8} {exact.get(k, 0):8.4f} {wil.get(k, 0):8.4f} {le.get(k, 0):8.4f}")
    print(f"TV(wilson, exact) = {total_variation_pmf(wil, exact):.4f}")
    print(f"TV(lerw, exact)   = {total_variation_pmf(le, exact):.4f}")


if __name__ == "__main__":
    main()
