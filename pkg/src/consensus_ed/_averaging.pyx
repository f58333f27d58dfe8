# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled averaging rounds over a CSR weight matrix."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def average_rounds(cnp.intp_t[::1] indptr, cnp.intp_t[::1] indices,
                   double[::1] data, x_in, double spread_tol,
                   long max_rounds):
    """Apply x <- A x until max(x) - min(x) <= spread_tol.

    Returns the averaged vector and the number of rounds performed.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef double[::1] cur = np.array(x_in, dtype=np.float64, copy=True)
    cdef double[::1] nxt = np.empty(n, dtype=np.float64)
    cdef double[::1] tmp
    cdef Py_ssize_t i, k
    cdef long rounds = 0
    cdef double s, lo, hi

    if n == 0:
        return np.asarray(cur), 0
    lo = cur[0]
    hi = cur[0]
    for i in range(1, n):
        if cur[i] < lo:
            lo = cur[i]
        if cur[i] > hi:
            hi = cur[i]
    while hi - lo > spread_tol and rounds < max_rounds:
        lo = 1e308
        hi = -1e308
        for i in range(n):
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * cur[indices[k]]
            nxt[i] = s
            if s < lo:
                lo = s
            if s > hi:
                hi = s
        tmp = cur
        cur = nxt
        nxt = tmp
        rounds += 1
    return np.asarray(cur), rounds
