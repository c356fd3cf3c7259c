"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from clusterlab import _kernels_py as py
from clusterlab import kernels


def cases(n):
    gen = np.random.default_rng(0)
    z = (1.0 - gen.random(n)) ** -1.0
    a = np.array([1.0, 0.5, 0.25])
    return {
        "block_stats(r=100)": (lambda k: k.block_stats(z, 100, 1000.0)),
        "block_maxima(r=100)": (lambda k: k.block_maxima(z, 100)),
        "ar1_filter": (lambda k: k.ar1_filter(z, 0.5, 0.0)),
        "moving_max(l=2)": (lambda k: k.moving_max(z, a)),
    }


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=10**7)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled kernels not available; only the fallback is timed")
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<22}{'compiled ns/val':>16}{'numpy ns/val':>14}{'speedup':>9}")
    for name, fn in cases(args.n).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        if kernels.BACKEND == "cython":
            t_c = min(timeit.repeat(lambda: fn(kernels), number=1, repeat=args.repeat))
            print(f"{name:<22}{1e9 * t_c / args.n:>16.2f}{1e9 * t_py / args.n:>14.2f}{t_py / t_c:>8.1f}x")
        else:
            print(f"{name:<22}{'-':>16}{1e9 * t_py / args.n:>14.2f}{'-':>9}")


if __name__ == "__main__":
    main()
