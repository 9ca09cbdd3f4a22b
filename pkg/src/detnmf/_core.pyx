# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled simplex pivot loop and HALS column sweep."""
import numpy as np

cdef int OPTIMAL = 0
cdef int UNBOUNDED = 1
cdef int GUARD = 2


cdef void _pivot(double[:, ::1] T, long[::1] basis, Py_ssize_t row,
                 Py_ssize_t col) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef Py_ssize_t nr = T.shape[0]
    cdef Py_ssize_t nc = T.shape[1]
    cdef double piv = T[row, col]
    cdef double f
    for j in range(nc):
        T[row, j] = T[row, j] / piv
    for i in range(nr):
        if i == row:
            continue
        f = T[i, col]
        if f != 0.0:
            for j in range(nc):
                T[i, j] = T[i, j] - f * T[row, j]
        T[i, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


cdef int _simplex(double[:, ::1] T, long[::1] basis, Py_ssize_t n_elig,
                  long max_pivots, double opt_tol, double piv_tol,
                  long *count) noexcept nogil:
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t rhs = T.shape[1] - 1
    cdef bint bland = False
    cdef Py_ssize_t i, j, col, row
    cdef double best, tie, ratio, v, cmin, thresh
    cdef long bidx
    count[0] = 0
    while True:
        col = -1
        if bland:
            for j in range(n_elig):
                if T[m, j] < -opt_tol:
                    col = j
                    break
        else:
            cmin = 0.0
            for j in range(n_elig):
                if col < 0 or T[m, j] < cmin:
                    cmin = T[m, j]
                    col = j
            if col >= 0 and not (cmin < -opt_tol):
                col = -1
        if col < 0:
            return OPTIMAL
        thresh = 0.0
        for i in range(m):
            if T[i, col] > thresh:
                thresh = T[i, col]
        if thresh < 1e-14:
            return UNBOUNDED
        thresh = thresh * piv_tol
        best = -1.0
        for i in range(m):
            v = T[i, col]
            if v > thresh:
                ratio = T[i, rhs]
                if ratio < 0.0:
                    ratio = 0.0
                ratio = ratio / v
                if best < 0.0 or ratio < best:
                    best = ratio
        if best < 0.0:
            return UNBOUNDED
        if count[0] >= max_pivots:
            return GUARD
        tie = 1e-12 * (1.0 + best)
        row = -1
        bidx = 0
        for i in range(m):
            v = T[i, col]
            if v > thresh:
                ratio = T[i, rhs]
                if ratio < 0.0:
                    ratio = 0.0
                ratio = ratio / v
                if ratio <= best + tie and (row < 0 or basis[i] < bidx):
                    row = i
                    bidx = basis[i]
        _pivot(T, basis, row, col)
        count[0] += 1
        bland = best <= tie


def simplex_loop(double[:, ::1] T, long[::1] basis, Py_ssize_t n_elig,
                 long max_pivots, double opt_tol, double piv_tol):
    cdef long count = 0
    cdef int status
    with nogil:
        status = _simplex(T, basis, n_elig, max_pivots, opt_tol, piv_tol,
                          &count)
    return status, count


def hals_update(double[:, ::1] F, double[:, ::1] XtG, double[:, ::1] GtG):
    cdef Py_ssize_t n = F.shape[0]
    cdef Py_ssize_t r = F.shape[1]
    cdef Py_ssize_t i, k, l
    cdef double g, acc, v
    with nogil:
        for k in range(r):
            g = GtG[k, k]
            if g <= 0.0:
                continue
            for i in range(n):
                acc = 0.0
                for l in range(r):
                    acc = acc + F[i, l] * GtG[l, k]
                v = F[i, k] + (XtG[i, k] - acc) / g
                F[i, k] = v if v > 0.0 else 0.0
