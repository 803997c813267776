"""Benchmark the compiled graph kernels against the pure-Python twins.

Times all-sources shortest paths and spanning-forest construction on
seeded random connected graphs at a few sizes, then prints a table with
the speedup. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--sizes 16,64,256] [--repeat 5]

The two implementations are required to be call-for-call identical (the
test suite enforces that); this script only measures speed.
"""
from __future__ import annotations

import argparse
import random
import time

from phoenixsen.kernels import IMPLEMENTATION, pure

try:
    from phoenixsen.kernels import _graphcore as compiled
except ImportError:
    compiled = None


def random_connected(rng: random.Random, n: int, extra: int) -> list[tuple[int, int]]:
    """Spanning tree over 0..n-1 plus ``extra`` random chords, deduplicated."""
    edges = {(min(i, j), max(i, j)) for i, j in ((i, rng.randrange(i)) for i in range(1, n))}
    while len(edges) < n - 1 + extra:
        a, b = rng.randrange(n), rng.randrange(n)
        if a != b:
            edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def bench(impl, n: int, edges: list[tuple[int, int]], repeat: int) -> float:
    """Best-of-``repeat`` seconds for one full workload on one implementation."""
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for src in range(n):
            impl.shortest_paths(n, edges, src)
        impl.spanning_tree(n, edges)
        impl.components(n, edges)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16,64,256", help="comma-separated node counts")
    parser.add_argument("--repeat", type=int, default=5, help="timing repeats, best kept")
    parser.add_argument("--seed", type=int, default=7, help="graph generator seed")
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = random.Random(args.seed)

    print(f"active implementation at import: {IMPLEMENTATION}")
    if compiled is None:
        print("compiled extension not built; timing pure only")
    print(f"{'nodes':>6} {'edges':>6} {'pure (ms)':>10} {'compiled (ms)':>14} {'speedup':>8}")
    for n in sizes:
        edges = random_connected(rng, n, extra=n)
        t_pure = bench(pure, n, edges, args.repeat) * 1000
        if compiled is not None:
            t_comp = bench(compiled, n, edges, args.repeat) * 1000
            print(f"{n:>6} {len(edges):>6} {t_pure:>10.2f} {t_comp:>14.2f} {t_pure / t_comp:>7.1f}x")
        else:
            print(f"{n:>6} {len(edges):>6} {t_pure:>10.2f} {'-':>14} {'-':>8}")


if __name__ == "__main__":
    main()
