#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times the convolution paths (direct-loop numba vs im2col/BLAS) and the
patch-based flow search on representative shapes. The numba path pays a
one-off compile cost that is excluded by a warmup call. These numbers
are why the package always convolves via im2col while the flow kernels
default to numba.

Usage: python benchmarks/bench_backends.py [--repeats N] [--full]
"""

import argparse
import time

import numpy as np

from flowqa._accel import kernels_numba, kernels_numpy


def _time(fn, repeats):
    fn()  # warmup (and JIT compile for the numba path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_conv(size, repeats):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((3, size, size)).astype(np.float32)
    w = rng.standard_normal((64, 3, 11, 11)).astype(np.float32)
    b = rng.standard_normal(64).astype(np.float32)
    rows = []
    for label, mod in (("numba", kernels_numba), ("numpy", kernels_numpy)):
        dt = _time(lambda: mod.conv2d_nchw(x, w, b, 4, 2), repeats)
        rows.append((f"conv 11x11/4 3->64 @{size}", label, dt))
    return rows


def bench_flow(size, repeats):
    rng = np.random.default_rng(1)
    i1 = rng.standard_normal((size, size))
    for _ in range(4):
        i1 = (np.roll(i1, 1, 0) + i1 + np.roll(i1, -1, 0)) / 3.0
        i1 = (np.roll(i1, 1, 1) + i1 + np.roll(i1, -1, 1)) / 3.0
    i2 = np.roll(i1, 3, axis=1)
    gx = np.gradient(i1, axis=1)
    gy = np.gradient(i1, axis=0)
    radius, stride = 4, 4
    centers = np.arange(radius, size - radius, stride, dtype=np.int64)
    cy, cx = (a.ravel() for a in np.meshgrid(centers, centers, indexing="ij"))
    u0 = np.zeros(cy.size)
    v0 = np.zeros(cy.size)
    rows = []
    for label, mod in (("numba", kernels_numba), ("numpy", kernels_numpy)):
        dt = _time(
            lambda: mod.inverse_search(i1, i2, gx, gy, cy, cx, u0, v0,
                                       radius, 12, 1e-8),
            repeats)
        rows.append((f"inverse search {cy.size} patches @{size}", label, dt))
        dt = _time(
            lambda: mod.densify(cy, cx, u0, v0, np.full(cy.size, 0.1),
                                radius, size, size),
            repeats)
        rows.append((f"densify @{size}", label, dt))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--full", action="store_true",
                        help="also run 1080p-class shapes")
    args = parser.parse_args()

    rows = []
    rows += bench_conv(256, args.repeats)
    rows += bench_flow(256, args.repeats)
    if args.full:
        rows += bench_conv(1080, args.repeats)
        rows += bench_flow(1080, args.repeats)

    print(f"{'kernel':40s} {'backend':8s} {'best (ms)':>10s}")
    print("-" * 62)
    by_kernel = {}
    for name, label, dt in rows:
        print(f"{name:40s} {label:8s} {dt * 1e3:10.2f}")
        by_kernel.setdefault(name, {})[label] = dt
    print("-" * 62)
    for name, t in by_kernel.items():
        if "numba" in t and "numpy" in t:
            print(f"{name:40s} speedup  {t['numpy'] / t['numba']:9.1f}x")


if __name__ == "__main__":
    main()
