"""Time the compiled and pure-Python kernels side by side.

Usage: python3 bench/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from deltaq import _backend
from deltaq.expr import parse
from deltaq.numeric import DeltaQ, Grid, all_to_finish, any_to_finish, convolve
from deltaq.oracle import sample
from deltaq.semantics import BasicAssignment, DistributionSpec as D


def _random_dq(rng, grid):
    mass = rng.random(grid.size)
    mass *= 0.9 / mass.sum()
    return DeltaQ(grid, mass, 0.0, 1.0 - mass.sum())


def cases():
    rng = np.random.default_rng(0)
    grid = Grid(0.01, 2000)
    a, b = _random_dq(rng, grid), _random_dq(rng, grid)
    sparse = DeltaQ(grid, np.bincount([100, 700, 1500], [0.5, 0.3, 0.2], grid.size))
    asg = BasicAssignment(Grid(0.05, 800), {
        "a": D.exponential(1.0, success=0.99), "b": D.uniform(0.5, 2.0),
        "c": D.table([(0.5, 0.2), (1.5, 0.9), (3.0, 1.0)]), "d": D.point(1.0)})
    expr = parse("((a ->- b) /\\ (c \\/ d)) <[0.9]> (a ->- (b <[0.5]> c))")
    return {
        "convolve N=2000": lambda: convolve(a, b, "direct"),
        "convolve sparse N=2000": lambda: convolve(sparse, b, "direct"),
        "all-to-finish N=2000": lambda: all_to_finish(a, b),
        "any-to-finish N=2000": lambda: any_to_finish(a, b),
        "sample 1e5 trials": lambda: sample(expr, asg, seed=1, trials=100_000),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = _backend.available()
    table = {}
    for name in backends:
        with _backend.using(name):
            for label, fn in cases().items():
                fn()
                best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
                table.setdefault(label, {})[name] = best
    header = f"{'case':24s}" + "".join(f"{n:>12s}" for n in backends)
    if "cython" in backends and "python" in backends:
        header += f"{'speedup':>10s}"
    print(header)
    for label, row in table.items():
        line = f"{label:24s}" + "".join(f"{row[n] * 1e3:10.3f}ms" for n in backends)
        if "cython" in row and "python" in row:
            line += f"{row['python'] / row['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
