"""Compare the compiled and pure-Python shortest-path kernels.

    python benchmarks/bench_kernels.py [--grid 10 20 40] [--repeat 50]

Each query removes a random 20% of the edges, like a mid-episode LazySP
state, and runs one start-goal shortest path.
"""

import argparse
import time

import numpy as np

from lazysearch import kernels
from lazysearch.graph import LENGTH_TOL, grid_graph


def time_backend(mod, graph, masks):
    indptr, nbr, eid = graph.csr
    s, g = graph.start_index, graph.goal_index
    t0 = time.perf_counter()
    for m in masks:
        mod.shortest_path(indptr, nbr, eid, graph.lengths, m, s, g, LENGTH_TOL)
    return (time.perf_counter() - t0) / len(masks)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, nargs="+", default=[10, 20, 40])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'grid':>6} {'edges':>7} " + " ".join(f"{b + ' ms':>11}" for b in kernels.BACKENDS) + "  speedup")
    for n in args.grid:
        graph = grid_graph(n)
        masks = [(rng.random(graph.n_edges) < 0.2).astype(np.uint8) for _ in range(args.repeat)]
        times = {b: time_backend(mod, graph, masks) for b, mod in kernels.BACKENDS.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        cols = " ".join(f"{1e3 * t:11.3f}" for t in times.values())
        print(f"{n:>6} {graph.n_edges:>7} {cols}  {speed:6.1f}x")


if __name__ == "__main__":
    main()
