# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-tag kernels. Semantics match ``_kernels_py`` exactly."""
import numpy as np

from libc.stdint cimport int64_t, uint8_t


def pair_histogram(const int64_t[::1] ta, const int64_t[::1] tb, int64_t bin_ps, int64_t half_bins):
    cdef Py_ssize_t na = ta.shape[0]
    cdef Py_ssize_t nb = tb.shape[0]
    cdef Py_ssize_t i, j, lo = 0
    cdef int64_t H = (2 * half_bins + 1) * bin_ps
    cdef int64_t dmin = -(H // 2)
    cdef int64_t dmax = (H - 1) // 2
    cdef int64_t two_bin = 2 * bin_ps
    cdef int64_t t, dt
    out = np.zeros(2 * half_bins + 1, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(na):
            t = ta[i]
            while lo < nb and tb[lo] - t < dmin:
                lo += 1
            j = lo
            while j < nb:
                dt = tb[j] - t
                if dt > dmax:
                    break
                # 2*dt + H >= 0, so truncating division is floor division
                o[(2 * dt + H) // two_bin] += 1
                j += 1
    return out


def window_hits(const int64_t[::1] ts, const int64_t[::1] tx, int64_t window_ps):
    cdef Py_ssize_t ns = ts.shape[0]
    cdef Py_ssize_t nx = tx.shape[0]
    cdef Py_ssize_t i, lo = 0
    cdef int64_t t
    out = np.zeros(ns, dtype=np.uint8)
    cdef uint8_t[::1] o = out
    with nogil:
        for i in range(ns):
            t = ts[i]
            while lo < nx and tx[lo] < t - window_ps:
                lo += 1
            if lo < nx and tx[lo] <= t + window_ps:
                o[i] = 1
    return out.view(np.bool_)
