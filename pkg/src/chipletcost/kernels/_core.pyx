# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; semantics match ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def gather_scan(row_bytes):
    cdef Py_ssize_t j, n = len(row_bytes)
    cdef double total = 0.0, left = 0.0, right, worst, best = INFINITY, b
    cdef Py_ssize_t best_j = 0
    cdef double[::1] rb = np.asarray(row_bytes, dtype=np.float64)
    for j in range(n):
        total += rb[j]
    for j in range(n):
        b = rb[j]
        right = total - left - b
        worst = left if left > right else right
        if worst < best:
            best_j = j
            best = worst
        left += b
    return best_j, best


def op_grid_search(FX, FY, PX, PY, double comp_coef, A, B, Cst, double best=INFINITY, extra=None):
    cdef cnp.int64_t[:, ::1] fx = np.ascontiguousarray(FX, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] fy = np.ascontiguousarray(FY, dtype=np.int64)
    cdef double[:, ::1] px = np.ascontiguousarray(PX, dtype=np.float64)
    cdef double[:, ::1] py = np.ascontiguousarray(PY, dtype=np.float64)
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(Cst, dtype=np.float64)
    cdef Py_ssize_t n = fx.shape[0], m = fy.shape[0], X = fx.shape[1], Y = fy.shape[1]
    if extra is None:
        extra = np.zeros((n, m))
    cdef double[:, ::1] ex = np.ascontiguousarray(extra, dtype=np.float64)
    cdef double e
    cdef Py_ssize_t i, j, x, y, bi = -1, bj = -1
    cdef double comp, comm, v
    cdef cnp.int64_t t
    cdef double[::1] mfx = np.empty(n, dtype=np.float64)
    cdef double[::1] mfy = np.empty(m, dtype=np.float64)
    for i in range(n):
        t = 0
        for x in range(X):
            if fx[i, x] > t:
                t = fx[i, x]
        mfx[i] = <double>t
    for j in range(m):
        t = 0
        for y in range(Y):
            if fy[j, y] > t:
                t = fy[j, y]
        mfy[j] = <double>t
    for i in range(n):
        for j in range(m):
            comp = (comp_coef * mfx[i]) * mfy[j]
            e = ex[i, j]
            if comp + e >= best:
                continue
            comm = -INFINITY
            for x in range(X):
                for y in range(Y):
                    v = (a[x, y] * px[i, x] + b[x, y] * py[j, y]) + c[x, y]
                    if v > comm:
                        comm = v
                if comm + e >= best:
                    break
            if comm + e >= best:
                continue
            v = (comp if comp > comm else comm) + e
            if v < best:
                best = v
                bi = i
                bj = j
    return best, bi, bj
