"""Scatter kernels with a compiled fast path and a numpy fallback.

The compiled module is used when it imports and ``MEVFLOW_PURE_PYTHON`` is
not set. Both paths accumulate in ascending index order, so results are
bit-identical.
"""

from __future__ import annotations

import os

import numpy as np


def scatter_add_py(src: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, src.shape[1]), dtype=np.float64)
    np.add.at(out, index, src)
    return out


def segment_max_py(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
    out = np.full(n, -np.inf, dtype=np.float64)
    np.maximum.at(out, index, values)
    return out


_compiled = None
if not os.environ.get("MEVFLOW_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def _prep(index: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(index, dtype=np.int64)


if _compiled is not None:
    def scatter_add(src: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
        return _compiled.scatter_add(np.ascontiguousarray(src, dtype=np.float64), _prep(index), n)

    def segment_max(values: np.ndarray, index: np.ndarray, n: int) -> np.ndarray:
        return _compiled.segment_max(np.ascontiguousarray(values, dtype=np.float64), _prep(index), n)
else:
    scatter_add = scatter_add_py
    segment_max = segment_max_py
