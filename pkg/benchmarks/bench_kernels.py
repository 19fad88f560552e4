"""Compare the numba and numpy backends of the hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is timed on
both implementations (numba after a warm-up call that triggers compilation)
and the largest absolute disagreement is reported next to the speedup.
"""

import argparse
import time

import numpy as np

from lavgap import _accel, kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(rng, scale):
    lam, k = 1.0 / 3.0, 12
    x = rng.uniform(-1.0, 1.0, 200000 * scale)
    rad = rng.uniform(1e-3, 0.5, 20000 * scale)
    xd = rng.uniform(-1.0, 1.0, rad.size)
    n = 1024 * scale
    v = np.sin(np.linspace(-3.0, 3.0, n))
    offs = np.arange(n, dtype=float)
    offs[0] = 1.0
    table = offs ** -2.0
    bins = np.floor(np.log2(offs)).astype(np.int64)
    pts = rng.uniform(-1.0, 1.0, (1500 * scale, 2))
    vals = np.sin(3.0 * pts[:, 0]) * pts[:, 1]
    return [
        ("cantor_distance", lambda: kernels._cantor_distance_nb(x, lam, k)[0],
         lambda: kernels._cantor_distance_np(x, lam, k)[0]),
        ("cantor_cdf", lambda: kernels._cantor_cdf_nb(x, lam, k),
         lambda: kernels._cantor_cdf_np(x, lam, k)),
        ("saddle_sum", lambda: kernels._saddle_sum_nb(rad, xd, lam, k, 1.0 / 32.0),
         lambda: kernels._saddle_sum_np(rad, xd, lam, k, 1.0 / 32.0)),
        ("pair_sum_table", lambda: kernels._pair_sum_table_nb(v, 2.0, table, 12, bins),
         lambda: kernels._pair_sum_table_np(v, 2.0, table, 12, bins)),
        ("pair_sum_points",
         lambda: kernels._pair_sum_points_nb(pts, vals, 2.0, 3.0, 1e-3, 1e-4, -12, 14),
         lambda: kernels._pair_sum_points_np(pts, vals, 2.0, 3.0, 1e-3, 1e-4, -12, 14)),
    ]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=int, default=1, help="problem size multiplier")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba backend disabled; only the numpy path can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fast, slow in cases(rng, args.scale):
        a = np.asarray(fast())  # compiles on the first call
        b = np.asarray(slow())
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        diff = float(np.max(np.abs(a - b)))
        speed = t_slow / t_fast if t_fast > 0 else float("inf")
        print(f"{name:<18}{t_fast:>12.4f}{t_slow:>12.4f}{speed:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
