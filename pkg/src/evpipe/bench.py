"""Rasterization benchmark comparing the numba and numpy kernel paths.

Run as ``python -m evpipe.bench``. The jitted path is warmed once so
compilation time is excluded from the measurement.
"""

import argparse
import time

import numpy as np

from . import _kernels


def make_random_events(n, width=1280, height=720, seed=0):
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, width, n).astype(np.uint16)
    ys = rng.integers(0, height, n).astype(np.uint16)
    ps = rng.integers(0, 2, n).astype(np.uint8)
    return xs, ys, ps


def measure(fn, xs, ys, ps, height, width, repeats=3):
    """Best events/s over `repeats` runs of one full rasterization."""
    best = 0.0
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(xs, ys, ps, height, width, True)
        dt = time.perf_counter() - t0
        best = max(best, xs.size / dt)
    return best


def run(n_events=2_000_000, width=1280, height=720, repeats=3):
    xs, ys, ps = make_random_events(n_events, width, height)
    results = {}
    results["numpy"] = measure(
        _kernels.rasterize_counts_numpy, xs, ys, ps, height, width, repeats
    )
    if _kernels.rasterize_counts_numba is not None:
        # warm the jit once before timing
        _kernels.rasterize_counts_numba(xs[:16], ys[:16], ps[:16], height, width, True)
        results["numba"] = measure(
            _kernels.rasterize_counts_numba, xs, ys, ps, height, width, repeats
        )
    return results


def main(argv=None):
    parser = argparse.ArgumentParser(description="rasterization throughput benchmark")
    parser.add_argument("--events", type=int, default=2_000_000)
    parser.add_argument("--width", type=int, default=1280)
    parser.add_argument("--height", type=int, default=720)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)
    results = run(args.events, args.width, args.height, args.repeats)
    print(f"rasterize {args.events} events on {args.width}x{args.height} "
          f"(active backend: {_kernels.BACKEND})")
    for name, rate in results.items():
        print(f"  {name:>6}: {rate / 1e6:8.1f} Mev/s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
