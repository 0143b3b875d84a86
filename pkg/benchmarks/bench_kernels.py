"""Timing comparison of the compiled and pure-Python sign kernels.

Usage: python benchmarks/bench_kernels.py [--repeat 5]

Times bilinear_elements over every mode pair of a half-filled sector at a few
chain lengths, for whichever backends are importable, and prints the per-call
cost and the speedup of the compiled extension over the Python twin.
"""

import argparse
import time

import numpy as np

from linres import kernels
from linres.lattice import FockBasis, LatticeGeometry, TORUS, _binom_table


def collect_backends():
    backends = {"python": kernels.python_impl}
    if kernels.BACKEND == "cython":
        backends["cython"] = kernels
    return backends


def bench_backend(impl, states, modes, binom, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for p in range(modes):
            for q in range(modes):
                impl.bilinear_elements(states, p, q, binom)
        best = min(best, time.perf_counter() - t0)
    return best / (modes * modes)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--lengths", type=int, nargs="+", default=[8, 12, 16, 20])
    args = parser.parse_args()

    backends = collect_backends()
    print(f"active backend: {kernels.BACKEND}")
    header = ["modes", "sector dim"] + [f"{n} [us/call]" for n in backends]
    if len(backends) == 2:
        header.append("speedup")
    print("  ".join(f"{h:>14}" for h in header))
    for L in args.lengths:
        basis = FockBasis(LatticeGeometry.chain(L, TORUS), s=1, N=L // 2)
        states = basis.states
        binom = _binom_table(L, L // 2 + 1)
        times = {name: bench_backend(impl, states, L, binom, args.repeat)
                 for name, impl in backends.items()}
        row = [f"{L:>14}", f"{basis.dimension:>14}"]
        row += [f"{times[n] * 1e6:>14.2f}" for n in backends]
        if len(times) == 2:
            row.append(f"{times['python'] / times['cython']:>14.1f}x")
        print("  ".join(row))


if __name__ == "__main__":
    main()
