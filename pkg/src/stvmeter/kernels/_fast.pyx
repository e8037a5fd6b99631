# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the hot reduction and kernel loops.

Mirrors kernels._ref: the pairwise reductions follow the identical
adjacent-pair tree so sums agree bit for bit with the numpy backend.
Elementwise kernel evaluation may differ from numpy in the last ulp
(libm vs vectorized cos), which callers treat as equivalent.
"""

from libc.math cimport cos

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef double _tree_sum(double[::1] buf, Py_ssize_t n) noexcept nogil:
    # In-place adjacent-pair reduction; reads of level k happen at
    # indices >= write index, so the in-place update is safe.
    cdef Py_ssize_t m, i
    while n > 1:
        m = n // 2
        for i in range(m):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if n & 1:
            buf[m] = buf[n - 1]
            n = m + 1
        else:
            n = m
    return buf[0]


def pairwise_sum(values):
    """Sum a float64 array with the fixed adjacent-pair reduction tree."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.array(
        values, dtype=np.float64, copy=True
    )
    if buf.size == 0:
        return 0.0
    return float(_tree_sum(buf, buf.size))


def central_moments(values):
    """Return (mean, m2, m4) with the same tree sums as the numpy backend."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.ascontiguousarray(
        values, dtype=np.float64
    )
    cdef Py_ssize_t n = x.size
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch = x.copy()
    cdef double mean = _tree_sum(scratch, n) / n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d2 = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double d
    for i in range(n):
        d = x[i] - mean
        d2[i] = d * d
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d4 = d2 * d2
    scratch[:] = d2
    cdef double m2 = _tree_sum(scratch, n) / n
    scratch[:] = d4
    cdef double m4 = _tree_sum(scratch, n) / n
    return mean, m2, m4


def kernel_values(x, theta, double phi, double eta):
    """Evaluate the second-moment estimation kernel per sample."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(
        x, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tv = np.ascontiguousarray(
        theta, dtype=np.float64
    )
    cdef Py_ssize_t n = xv.size
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double vac = (1.0 - eta) * 0.25
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = (xv[i] * xv[i] * (1.0 + 2.0 * cos(2.0 * (tv[i] - phi))) - vac) / eta
    return out
