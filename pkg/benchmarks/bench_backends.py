#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the two hot paths: raw log-Bessel evaluation over an array, and
the per-component expectation kernel (log density + both latent-weight
moments) that dominates every E-step. Run directly:

    python3 benchmarks/bench_backends.py [--n 200000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from psalm import _kernels_numba as numba_k
from psalm import _kernels_numpy as numpy_k


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    z = np.exp(rng.uniform(np.log(1e-4), np.log(300.0), args.n))
    b = rng.chisquare(3, args.n) + 1e-9
    shift = rng.normal(0.0, 1.0, args.n)

    # compile outside the timed region
    numba_k.log_kv_arr(-0.5, z[:16])
    numba_k.component_expectations(b[:16], shift[:16], 3.0, -0.5, 0.0, -1.7)
    numba_k.component_expectations(b[:16], shift[:16], 3.0, -0.5, 0.3, -1.7)

    rows = []
    for name, nb, npf in [
        ("log K_nu over array (nu=-0.5)",
         lambda: numba_k.log_kv_arr(-0.5, z),
         lambda: numpy_k.log_kv_arr(-0.5, z)),
        ("E-step kernel, psi=0",
         lambda: numba_k.component_expectations(b, shift, 3.0, -0.5, 0.0, -1.7),
         lambda: numpy_k.component_expectations(b, shift, 3.0, -0.5, 0.0, -1.7)),
        ("E-step kernel, psi=0.3",
         lambda: numba_k.component_expectations(b, shift, 3.0, -0.5, 0.3, -1.7),
         lambda: numpy_k.component_expectations(b, shift, 3.0, -0.5, 0.3, -1.7)),
    ]:
        t_nb = timeit(nb, args.repeats)
        t_np = timeit(npf, args.repeats)
        rows.append((name, t_nb, t_np))

    # agreement check on the shared workload
    a1 = numba_k.log_kv_arr(-0.5, z)
    a2 = numpy_k.log_kv_arr(-0.5, z)
    agree = float(np.max(np.abs(a1 - a2)))

    width = max(len(r[0]) for r in rows)
    print(f"n = {args.n} elements, best of {args.repeats} runs")
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name, t_nb, t_np in rows:
        print(f"{name:<{width}}  {t_nb * 1e3:>8.2f}ms  {t_np * 1e3:>8.2f}ms  "
              f"{t_np / t_nb:>7.2f}x")
    print(f"max |numba - numpy| on log K: {agree:.3e}")


if __name__ == "__main__":
    main()
