#!/usr/bin/env python3
"""Benchmark the numba kernel backend against the pure-numpy fallback.

Times the three t-SNE kernels on synthetic data at a few problem sizes and
reports the speedup plus the maximum numeric disagreement between backends
(the backends agree to float tolerance, not bitwise, because summation order
differs).

    python3 benchmarks/bench_kernels.py --sizes 200,500,1000 --dim 64
"""
import argparse
import os
import time

import numpy as np

from newsbench import kernels
from newsbench.rng import named_rng


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def with_backend(name, fn):
    os.environ["NEWSBENCH_NO_NUMBA"] = "0" if name == "numba" else "1"
    try:
        return fn()
    finally:
        os.environ.pop("NEWSBENCH_NO_NUMBA", None)


def bench_size(n, dim, perplexity, repeats, have_numba):
    rng = named_rng(0, "bench", n)
    x = rng.normal(size=(n, dim))
    dists = kernels.pairwise_sq_dists(x)
    cond, _ = kernels.conditional_probs(dists, perplexity=perplexity)
    joint = (cond + cond.T) / (2.0 * n)
    y = rng.normal(size=(n, 2))

    cases = [
        ("pairwise_sq_dists", lambda: kernels.pairwise_sq_dists(x)),
        ("conditional_probs", lambda: kernels.conditional_probs(dists, perplexity)[0]),
        ("tsne_step", lambda: kernels.tsne_step(joint, y)[0]),
    ]
    rows = []
    for name, call in cases:
        t_np = with_backend("numpy", lambda: best_of(call, repeats))
        if have_numba:
            with_backend("numba", call)  # warm up the JIT outside the timing
            t_nb = with_backend("numba", lambda: best_of(call, repeats))
            diff = float(np.max(np.abs(with_backend("numpy", call)
                                       - with_backend("numba", call))))
            rows.append((name, n, t_np, t_nb, diff))
        else:
            rows.append((name, n, t_np, None, None))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="200,500,1000",
                        help="comma-separated point counts")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--perplexity", type=float, default=30.0)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    have_numba = kernels.HAVE_NUMBA
    if have_numba:
        import numba
        print(f"numba {numba.__version__} available; comparing both backends")
    else:
        print("numba not installed; timing the numpy fallback only "
              "(pip install 'newsbench[accel]')")
    print(f"{'kernel':<20}{'n':>6}{'numpy':>12}{'numba':>12}"
          f"{'speedup':>10}{'max|diff|':>12}")

    for n in (int(s) for s in args.sizes.split(",")):
        if n <= 3 * args.perplexity:
            print(f"skipping n={n}: needs n > 3*perplexity")
            continue
        for name, size, t_np, t_nb, diff in bench_size(
                n, args.dim, args.perplexity, args.repeats, have_numba):
            np_ms = f"{t_np * 1e3:9.2f} ms"
            if t_nb is None:
                print(f"{name:<20}{size:>6}{np_ms:>12}{'-':>12}{'-':>10}{'-':>12}")
            else:
                nb_ms = f"{t_nb * 1e3:9.2f} ms"
                print(f"{name:<20}{size:>6}{np_ms:>12}{nb_ms:>12}"
                      f"{t_np / t_nb:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
