"""Benchmark the compiled kernels against the pure-NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--samples 20000] [--n 6] [--repeat 5]
Prints a per-kernel timing table; the compiled column is skipped when the
extension is not built.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from s2wb import _kernels_py


def _load_compiled():
    try:
        from s2wb import _kernels_c
        return _kernels_c
    except ImportError:
        return None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=20000)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    lam = rng.uniform(-1.0, 5.0, size=(args.samples, args.n))
    s1 = lam.sum(axis=1)
    f = s1[:, None] - lam
    tensors = rng.standard_normal((args.samples, args.n, args.n, args.n))
    tensors = (tensors + tensors.transpose(0, 2, 1, 3) + tensors.transpose(0, 1, 3, 2)
               + tensors.transpose(0, 3, 2, 1) + tensors.transpose(0, 2, 3, 1)
               + tensors.transpose(0, 3, 1, 2)) / 6.0
    mats = rng.standard_normal((args.samples, args.n, args.n))
    mats = 0.5 * (mats + mats.transpose(0, 2, 1))

    cases = {
        "esp_batch": lambda k: k.esp_batch(lam),
        "esp_drop1_batch": lambda k: k.esp_drop1_batch(lam),
        "jacobi_eigh_batch": lambda k: k.jacobi_eigh_batch(mats),
        "tangency_project": lambda k: k.tangency_project(f, tensors),
        "excess_batch": lambda k: k.excess_batch(lam, tensors, 8.0, 4.0 / 3.0),
    }

    compiled = _load_compiled()
    header = f"{'kernel':<20} {'python [s]':>12}"
    if compiled:
        header += f" {'compiled [s]':>13} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, call in cases.items():
        t_py = _time(lambda: call(_kernels_py), args.repeat)
        line = f"{name:<20} {t_py:>12.4f}"
        if compiled:
            t_c = _time(lambda: call(compiled), args.repeat)
            line += f" {t_c:>13.4f} {t_py / t_c:>8.1f}x"
        print(line)
    if not compiled:
        print("\ncompiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    main()
