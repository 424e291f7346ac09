#!/usr/bin/env python3
"""Timing comparison of the three kernel implementations.

Times the pairwise SGD epoch and the degree-filter mask in their pure
Python, vectorized numpy, and compiled forms on synthetic workloads.
Compiled timings exclude the first (compilation) call.

Run: python3 benchmarks/bench_kernels.py [--rows 200000] [--repeats 5]
"""

import argparse
import time

import numpy as np

import recbench.kernels as kernels


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - started)
    return best


def bench_bpr(rows: int, d: int, repeats: int):
    rng = np.random.default_rng(0)
    n_users, n_items = max(rows // 20, 4), max(rows // 40, 4)
    users = rng.integers(1, n_users, rows)
    pos = rng.integers(1, n_items, rows)
    neg = rng.integers(1, n_items, rows)
    user_f = rng.normal(size=(n_users, d))
    item_f = rng.normal(size=(n_items, d))

    def run(fn):
        # copy factors so every variant starts from the same state
        return time_call(
            lambda: fn(users, pos, neg, user_f.copy(), item_f.copy(),
                       0.05, 1e-4), repeats=repeats)

    results = {
        "python loops": run(kernels._bpr_epoch_loops),
        "numpy": run(kernels._bpr_epoch_numpy),
    }
    if kernels.NUMBA_ENABLED:
        run(kernels._bpr_epoch_jit)  # compile outside the timing
        results["compiled"] = run(kernels._bpr_epoch_jit)
    return results


def bench_core(rows: int, repeats: int):
    rng = np.random.default_rng(1)
    n_users, n_items = max(rows // 10, 4), max(rows // 10, 4)
    u = rng.integers(1, n_users, rows).astype(np.int64)
    i = rng.integers(1, n_items, rows).astype(np.int64)

    def run(fn):
        return time_call(fn, u, i, n_users, n_items, 5, 5,
                         repeats=repeats)

    results = {
        "python loops": run(kernels._k_core_mask_loops),
        "numpy": run(kernels._k_core_mask_numpy),
    }
    if kernels.NUMBA_ENABLED:
        run(kernels._k_core_mask_jit)
        results["compiled"] = run(kernels._k_core_mask_jit)
    return results


def report(title: str, results: dict):
    print(f"\n{title}")
    base = results["python loops"]
    for name, seconds in results.items():
        print(f"  {name:<13} {seconds * 1e3:9.2f} ms   "
              f"{base / seconds:6.1f}x vs loops")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--d", type=int, default=16)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"active backend: {kernels.BACKEND} "
          f"(compiled available: {kernels.NUMBA_ENABLED})")
    report(f"pairwise SGD epoch, {args.rows} triples, d={args.d}",
           bench_bpr(args.rows, args.d, args.repeats))
    report(f"degree-filter mask, {args.rows} rows",
           bench_core(args.rows, args.repeats))


if __name__ == "__main__":
    main()
