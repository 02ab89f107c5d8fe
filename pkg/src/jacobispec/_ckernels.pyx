# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, log, INFINITY

cnp.import_array()


def propagate(const double[::1] c, const double[::1] d, double E,
              double u0, double u1, double rescale=1e150):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t k
    cdef double prev, cur, nxt
    cdef long long count = 0
    values_arr = np.zeros(n, dtype=np.float64)
    counts_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] values = values_arr
    cdef long long[::1] counts = counts_arr
    if n == 0:
        return values_arr, counts_arr
    values[0] = u0
    if n == 1:
        return values_arr, counts_arr
    values[1] = u1
    prev = u0
    cur = u1
    for k in range(1, n - 1):
        nxt = ((E - d[k]) * cur - c[k - 1] * prev) / c[k]
        if fabs(nxt) > rescale:
            count += 1
            cur /= rescale
            nxt /= rescale
        values[k + 1] = nxt
        counts[k + 1] = count
        prev = cur
        cur = nxt
    return values_arr, counts_arr


def log_cumsumsq(values_in, counts_in, double rescale=1e150):
    cdef const double[::1] values = np.ascontiguousarray(values_in, dtype=np.float64)
    cdef const long long[::1] counts = np.ascontiguousarray(counts_in, dtype=np.int64)
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t k
    cdef long long level = 0
    cdef double acc = 0.0
    cdef double r2 = rescale * rescale
    cdef double logr = log(rescale)
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    if n > 0:
        level = counts[0]
    for k in range(n):
        while counts[k] > level:
            acc /= r2
            level += 1
        acc += values[k] * values[k]
        if acc > 0.0:
            out[k] = log(acc) + 2.0 * level * logr
        else:
            out[k] = -INFINITY
    return out_arr


def cf_backward(const double[::1] a, const double[::1] b, double complex z,
                double complex seed):
    cdef Py_ssize_t k
    cdef double complex m = seed
    for k in range(b.shape[0] - 1, -1, -1):
        m = 1.0 / (b[k] - z - a[k] * a[k] * m)
    return m


def tridiag_solve(const double[::1] off, diag_in, rhs_in):
    cdef const double complex[::1] diag = np.ascontiguousarray(diag_in, dtype=np.complex128)
    out_arr = np.array(rhs_in, dtype=np.complex128, order="C", copy=True)
    cdef double complex[:, ::1] rhs = out_arr
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t r = rhs.shape[1]
    cdef Py_ssize_t k, j
    cp_arr = np.zeros(max(n - 1, 0), dtype=np.complex128)
    piv_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] cp = cp_arr
    cdef double complex[::1] piv = piv_arr
    piv[0] = diag[0]
    for k in range(1, n):
        cp[k - 1] = off[k - 1] / piv[k - 1]
        piv[k] = diag[k] - off[k - 1] * cp[k - 1]
        for j in range(r):
            rhs[k, j] = rhs[k, j] - cp[k - 1] * rhs[k - 1, j]
    for j in range(r):
        rhs[n - 1, j] = rhs[n - 1, j] / piv[n - 1]
    for k in range(n - 2, -1, -1):
        for j in range(r):
            rhs[k, j] = (rhs[k, j] - off[k] * rhs[k + 1, j]) / piv[k]
    return out_arr
