"""Time compute_cdsvd on random feasible dual real matrices.

Usage: python3 benchmarks/bench_cdsvd.py [--sizes 1000x500 ...] [--repeat 3] [--seed 0]
"""
import argparse
import time

import numpy as np

from dualsvd.cdsvd import compute_cdsvd
from dualsvd.config import child_generator
from dualsvd.matrix import DualMatrix
from dualsvd.testing import engineered_standard, feasible_infinitesimal


def build(rng, m, n):
    r = min(m, n)
    sigma = np.sort(rng.uniform(0.5, 5.0, r))[::-1]
    a_s, u, v = engineered_standard(rng, m, n, sigma, complex_=False)
    return DualMatrix(a_s, feasible_infinitesimal(rng, u, v, complex_=False))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", nargs="+", default=["200x100", "500x250", "1000x500"])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    for i, size in enumerate(args.sizes):
        m, n = (int(x) for x in size.lower().split("x"))
        a = build(child_generator(args.seed, i), m, n)
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            compute_cdsvd(a)
            times.append(time.perf_counter() - t0)
        print(f"{m:>5}x{n:<5} best {min(times):7.3f} s  median {np.median(times):7.3f} s")


if __name__ == "__main__":
    main()
