"""Compare the compiled scatter kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from mevflow.gnn import kernels


def cases():
    rng = np.random.default_rng(0)
    # (label, rows, cols, segments): a training batch, a big eval batch, a wide one
    for label, rows, cols, n in (("batch", 2_000, 64, 400), ("eval", 20_000, 64, 4_000), ("wide", 5_000, 256, 1_000)):
        src = rng.standard_normal((rows, cols))
        index = rng.integers(0, n, size=rows)
        yield label, src, index, n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")
        return
    print(f"{'case':8} {'kernel':12} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}")
    for label, src, index, n in cases():
        assert np.array_equal(kernels.scatter_add(src, index, n), kernels.scatter_add_py(src, index, n))
        values = src[:, 0].copy()
        assert np.array_equal(kernels.segment_max(values, index, n), kernels.segment_max_py(values, index, n))
        for name, fast, slow, operand in (
            ("scatter_add", kernels.scatter_add, kernels.scatter_add_py, src),
            ("segment_max", kernels.segment_max, kernels.segment_max_py, values),
        ):
            t_slow = min(timeit.repeat(lambda: slow(operand, index, n), number=1, repeat=args.repeat)) * 1e3
            t_fast = min(timeit.repeat(lambda: fast(operand, index, n), number=1, repeat=args.repeat)) * 1e3
            print(f"{label:8} {name:12} {t_slow:10.3f} {t_fast:10.3f} {t_slow / t_fast:7.1f}x")


if __name__ == "__main__":
    main()
