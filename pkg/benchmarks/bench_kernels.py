"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from bril import _kernels_py

try:
    from bril import _kernels as _ext
except ImportError:
    _ext = None


def _cases(rng):
    for n in (500, 1000, 2000):
        pts = np.ascontiguousarray(rng.uniform(size=(n, 2)))
        yield f"dbscan n={n}", lambda m, p=pts: m.dbscan_labels(p, 0.05, 5)
    for n in (5, 15, 40):
        A = rng.normal(size=(n, n))
        A = A @ A.T
        yield f"jacobi {n}x{n}", lambda m, a=A: m.jacobi_eigh(a)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'case':<18}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in _cases(rng):
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if _ext is None:
            print(f"{name:<18}{py:>12.2f}{'n/a':>12}{'':>10}")
            continue
        cy = min(timeit.repeat(lambda: fn(_ext), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<18}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
