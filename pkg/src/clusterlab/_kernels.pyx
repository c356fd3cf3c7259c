# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`clusterlab._kernels_py`."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def block_stats(const double[::1] x, Py_ssize_t r, double u):
    """Per-block exceedance count, first/last time (1-based) and cluster sum.

    ``x`` must have length ``m * r``. The cluster sum is the sum of ``x / u``
    between the first and last exceedance (inclusive), 0 when none.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = n // r
    cdef Py_ssize_t j, i, base, first, last, cnt
    cdef double s, inv = 1.0 / u
    count_a = np.zeros(m, dtype=np.int64)
    first_a = np.zeros(m, dtype=np.int64)
    last_a = np.zeros(m, dtype=np.int64)
    csum_a = np.zeros(m, dtype=np.float64)
    cdef long long[::1] count = count_a
    cdef long long[::1] fst = first_a
    cdef long long[::1] lst = last_a
    cdef double[::1] csum = csum_a
    for j in range(m):
        base = j * r
        cnt = 0
        first = -1
        last = -1
        for i in range(r):
            if x[base + i] > u:
                cnt += 1
                if first < 0:
                    first = i
                last = i
        count[j] = cnt
        if cnt > 0:
            fst[j] = first + 1
            lst[j] = last + 1
            s = 0.0
            for i in range(first, last + 1):
                s += x[base + i] * inv
            csum[j] = s
    return count_a, first_a, last_a, csum_a


def block_maxima(const double[::1] x, Py_ssize_t r):
    cdef Py_ssize_t m = x.shape[0] // r
    cdef Py_ssize_t j, i, base
    cdef double mx
    out_a = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_a
    for j in range(m):
        base = j * r
        mx = x[base]
        for i in range(1, r):
            if x[base + i] > mx:
                mx = x[base + i]
        out[j] = mx
    return out_a


def ar1_filter(const double[::1] z, double phi, double x0):
    """x[t] = phi * x[t-1] + z[t] with x[-1] = x0."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t t
    cdef double prev = x0
    out_a = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_a
    for t in range(n):
        prev = phi * prev + z[t]
        out[t] = prev
    return out_a


def moving_max(const double[::1] z, const double[::1] a):
    """out[t] = max_i a[i] * z[t + l - i], t = 0 .. len(z) - l - 1, l = len(a) - 1."""
    cdef Py_ssize_t l = a.shape[0] - 1
    cdef Py_ssize_t n = z.shape[0] - l
    cdef Py_ssize_t t, i
    cdef double mx, v
    if n <= 0:
        return np.empty(0, dtype=np.float64)
    out_a = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_a
    for t in range(n):
        mx = a[0] * z[t + l]
        for i in range(1, l + 1):
            v = a[i] * z[t + l - i]
            if v > mx:
                mx = v
        out[t] = mx
    return out_a
