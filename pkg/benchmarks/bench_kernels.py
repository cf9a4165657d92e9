"""Compare the compiled kd-tree kernel with the numpy brute-force fallback.

Run with ``python benchmarks/bench_kernels.py [--sizes 500 2000 8000] [--repeat 5]``.
Both kernels must return identical ids and squared distances; the table
reports the best-of-``repeat`` wall time of one transformed query of the
whole source cloud, which is the inner step of every ICP iteration.
"""

import argparse
import time

import numpy as np

from boicp import _backend
from boicp.cloud import KdIndex, PointCloud
from boicp.geom import pose_to_transform


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _backend.BACKEND != "compiled":
        print("compiled kernel not available; only the fallback will be timed")
    rng = np.random.default_rng(0)
    T = pose_to_transform([0.3, -0.2, 0.1, 0.2, -0.1, 0.5])
    print(f"{'n_ref':>7} {'n_src':>7} {'compiled ms':>12} {'numpy ms':>10} {'speed-up':>9}")
    for n in args.sizes:
        ref = KdIndex(PointCloud(rng.uniform(-10, 10, (n, 3))))
        src = rng.uniform(-10, 10, (n, 3))
        py = lambda: _backend.python_kernels.query_transformed(ref, src, T.rotation, T.translation)
        t_py = best_time(py, args.repeat)
        if _backend.BACKEND == "compiled":
            cc = lambda: _backend.kernels.query_transformed(ref, src, T.rotation, T.translation)
            a, b = cc(), py()
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]), "kernels disagree"
            t_cc = best_time(cc, args.repeat)
            print(f"{n:>7} {n:>7} {1e3 * t_cc:>12.3f} {1e3 * t_py:>10.3f} {t_py / t_cc:>8.1f}x")
        else:
            print(f"{n:>7} {n:>7} {'-':>12} {1e3 * t_py:>10.3f} {'-':>9}")


if __name__ == "__main__":
    main()
