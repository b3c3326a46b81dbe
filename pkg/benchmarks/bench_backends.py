"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--side 101] [--n 150] [--repeat 5]

Checks that both backends agree, then prints the best-of-``repeat`` time
per kernel and the speed-up.
"""
from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from direg.grid import RegularGrid, nearest_indices
from direg.kernels import get_backend


def _workload(side: int, n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    grid = RegularGrid(side)
    values = rng.standard_normal((n, grid.m0))
    t = rng.uniform(0.2, 0.8, size=(2000, 2))
    step = 0.05 * np.array([math.cos(0.7), math.sin(0.7)])
    ip = nearest_indices(grid, t + step)
    im = nearest_indices(grid, t - step)
    i0 = nearest_indices(grid, t - 2 * step)
    img = values[0].reshape(side, side)
    pts = grid.points()
    return values, ip, im, i0, img, pts


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--side", type=int, default=101)
    ap.add_argument("--n", type=int, default=150)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    values, ip, im, i0, img, pts = _workload(args.side, args.n)
    c, s, h1, h2 = math.cos(1.0), math.sin(1.0), 0.08, 0.05
    try:
        fast = get_backend("cython")
    except ImportError:
        print("compiled extension not built; only the fallback is available")
        return
    slow = get_backend("python")

    cases = {
        "mean_sq_diff": lambda k: k.mean_sq_diff(values, ip, im),
        "mean_cross_diff": lambda k: k.mean_cross_diff(values, i0, im, ip),
        "nw_grid_smooth": lambda k: k.nw_grid_smooth(img, pts, c, s, h1, h2),
    }
    print(f"side={args.side} N={args.n} M0={args.side ** 2}")
    print(f"{'kernel':<16}{'cython [ms]':>13}{'python [ms]':>13}{'speed-up':>10}")
    for name, fn in cases.items():
        a, b = np.asarray(fn(fast)), np.asarray(fn(slow))
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        tf = min(timeit.repeat(lambda: fn(fast), number=1, repeat=args.repeat))
        ts = min(timeit.repeat(lambda: fn(slow), number=1, repeat=args.repeat))
        print(f"{name:<16}{tf * 1e3:>13.2f}{ts * 1e3:>13.2f}{ts / tf:>10.1f}x")


if __name__ == "__main__":
    main()
