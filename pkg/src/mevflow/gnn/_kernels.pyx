# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled scatter kernels used by the message-passing layers."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def scatter_add(double[:, :] src, cnp.int64_t[:] index, Py_ssize_t n):
    """out[index[e]] += src[e], rows visited in ascending e."""
    cdef Py_ssize_t e, j, r
    cdef Py_ssize_t m = src.shape[0]
    cdef Py_ssize_t d = src.shape[1]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, :] out = out_arr
    for e in range(m):
        r = index[e]
        if r < 0 or r >= n:
            raise IndexError("scatter index out of range")
        for j in range(d):
            out[r, j] += src[e, j]
    return out_arr


def segment_max(double[:] values, cnp.int64_t[:] index, Py_ssize_t n):
    """Per-segment maximum; empty segments hold -inf."""
    cdef Py_ssize_t e, r
    cdef Py_ssize_t m = values.shape[0]
    out_arr = np.full(n, -np.inf, dtype=np.float64)
    cdef double[:] out = out_arr
    for e in range(m):
        r = index[e]
        if r < 0 or r >= n:
            raise IndexError("segment index out of range")
        if values[e] > out[r]:
            out[r] = values[e]
    return out_arr
