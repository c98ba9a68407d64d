#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Covers the three hot paths: convolution forward/backward at the detector's
real geometries, 2x2 max pooling, and the bicoherence triple-product
accumulation at the default feature geometry (K=100 segments, 64-bin grid).

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from voxstats.kernels import _reference

try:
    from voxstats.kernels import _fast
except ImportError:
    _fast = None

BACKENDS = [("numpy", _reference)] + ([("c", _fast)] if _fast else [])


def timeit(fn, repeats):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def benchmark_cases(rng):
    cases = []

    # Convolutions at the three stack geometries (batch of 8).
    for tag, (h, w, cin, cout) in [
        ("conv 32x32x1->30x30x32", (32, 32, 1, 32)),
        ("conv 30x30x32->28x28x64", (30, 30, 32, 64)),
        ("conv 14x14x64->12x12x128", (14, 14, 64, 128)),
    ]:
        x = rng.normal(size=(8, h, w, cin))
        k = rng.normal(size=(3, 3, cin, cout))
        b = rng.normal(size=cout)
        dy = rng.normal(size=(8, h - 2, w - 2, cout))
        cases.append((f"{tag} fwd", lambda m, x=x, k=k, b=b: m.conv2d_forward(x, k, b)))
        cases.append(
            (f"{tag} bwd", lambda m, x=x, k=k, dy=dy: m.conv2d_backward(x, k, dy))
        )

    pool_in = rng.normal(size=(8, 28, 28, 64))
    cases.append(("maxpool 28x28x64 fwd", lambda m: m.maxpool2_forward(pool_in)))

    spectra = np.ascontiguousarray(
        rng.normal(size=(100, 672)) + 1j * rng.normal(size=(100, 672))
    )
    cases.append(
        ("bicoherence K=100 G=64", lambda m: m.bicoherence_sums(spectra, 64))
    )
    return cases


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if _fast is None:
        print("note: compiled kernels not built; timing the fallback only\n")

    rng = np.random.default_rng(0)
    cases = benchmark_cases(rng)

    header = f"{'case':34s}" + "".join(f"{name:>12s}" for name, _ in BACKENDS)
    if len(BACKENDS) == 2:
        header += f"{'speedup':>10s}"
    print(header)
    print("-" * len(header))
    for label, fn in cases:
        times = [timeit(lambda m=mod: fn(m), args.repeats) for _, mod in BACKENDS]
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
