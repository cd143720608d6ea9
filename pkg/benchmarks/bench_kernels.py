#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy backend.

Run from the repository root after `pip install -e .`:

    python3 benchmarks/bench_kernels.py

Reports wall time per call (best of `repeats`) for both backends and the
maximum deviation between their results.
"""

import time

import numpy as np

import ergopt._kernels_py as pyk

try:
    import ergopt._kernels as ck
except ImportError:
    ck = None


def best_time(fn, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def row(name, py_fn, c_fn, deviation):
    t_py, out_py = best_time(py_fn)
    if c_fn is None:
        print(f"{name:34s} python {t_py * 1e3:9.2f} ms   compiled      (absent)")
        return
    t_c, out_c = best_time(c_fn)
    dev = deviation(out_py, out_c)
    print(f"{name:34s} python {t_py * 1e3:9.2f} ms   compiled "
          f"{t_c * 1e3:9.2f} ms   x{t_py / t_c:5.1f}   dev {dev:.2e}")


def main():
    rng = np.random.default_rng(0)
    print(f"compiled backend available: {ck is not None}")

    pair2 = np.ascontiguousarray(rng.uniform(0.5, 1.5, (2, 2, 2)))
    triple3 = np.ascontiguousarray(rng.uniform(0.5, 1.5, (3, 3, 3))
                                   + np.eye(3))

    for depth in (12, 16, 18):
        row(f"enum_product_cartan d=2 n={depth}",
            lambda d=depth: pyk.enum_product_cartan(pair2, None, d),
            (lambda d=depth: ck.enum_product_cartan(pair2, None, d)) if ck else None,
            lambda a, b: np.abs(a - b).max())
    row("enum_product_cartan d=3 n=10",
        lambda: pyk.enum_product_cartan(triple3, None, 10),
        (lambda: ck.enum_product_cartan(triple3, None, 10)) if ck else None,
        lambda a, b: np.abs(a - b).max())
    row("scan_norm_extremes d=2 depth=16",
        lambda: pyk.scan_norm_extremes(pair2, None, 16),
        (lambda: ck.scan_norm_extremes(pair2, None, 16)) if ck else None,
        lambda a, b: max(np.abs(a[0] - b[0]).max(), np.abs(a[1] - b[1]).max()))

    for d, count in ((2, 200_000), (3, 40_000)):
        g1 = rng.standard_normal((count, d, d))
        g2 = rng.standard_normal((count, d, d))
        p = np.ascontiguousarray(g1 @ np.swapaxes(g1, 1, 2) + 0.2 * np.eye(d))
        q = np.ascontiguousarray(g2 @ np.swapaxes(g2, 1, 2) + 0.2 * np.eye(d))
        row(f"midpoint_batch d={d} n={count}",
            lambda p=p, q=q: pyk.midpoint_batch(p, q),
            (lambda p=p, q=q: ck.midpoint_batch(p, q)) if ck else None,
            lambda a, b: np.abs(a - b).max() / np.abs(a).max())


if __name__ == "__main__":
    main()
