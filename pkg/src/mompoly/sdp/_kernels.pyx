# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Schur-complement assembly.

For upper-triangular constraint triplets grouped by row, accumulates

    M[r_g, r_h] += sum_{e in g, e' in h} v_e v_e' (W[a,d] W[b,c] + W[a,c] W[b,d]) / 2

for every pair of groups with h >= g, where e = (a, b) and e' = (c, d).  Values
must already carry the factor 2 for off-diagonal triplets.  Only the upper
triangle of M is written.

Per group the needed columns of W are gathered into two small contiguous
buffers, so every tail entry costs one short dot product.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport free, malloc

cnp.import_array()


def schur_block(const double[:, ::1] W,
                const cnp.int64_t[::1] ptr,
                const cnp.int64_t[::1] grp_row,
                const cnp.int64_t[::1] ii,
                const cnp.int64_t[::1] jj,
                const double[::1] vv,
                const cnp.int64_t[::1] erow,
                double[:, ::1] M):
    cdef Py_ssize_t G = grp_row.shape[0]
    cdef Py_ssize_t nnz = ii.shape[0]
    cdef Py_ssize_t n = W.shape[0]
    cdef Py_ssize_t kmax = 0
    cdef Py_ssize_t g, e, e2, s0, k, t, c, d
    cdef double sxy
    cdef const double* xc
    cdef const double* xd
    cdef const double* yc
    cdef const double* yd
    cdef double* Mrow
    cdef double* X
    cdef double* Y
    if nnz == 0:
        return
    for g in range(G):
        if ptr[g + 1] - ptr[g] > kmax:
            kmax = ptr[g + 1] - ptr[g]
    # X[c, t] = W[c, a_t] and Y[c, t] = v_t W[c, b_t] / 2 for the entries t of one group
    X = <double*> malloc(n * kmax * sizeof(double))
    Y = <double*> malloc(n * kmax * sizeof(double))
    if X == NULL or Y == NULL:
        free(X)
        free(Y)
        raise MemoryError()
    try:
        with nogil:
            for g in range(G):
                s0 = ptr[g]
                k = ptr[g + 1] - s0
                for c in range(n):
                    for t in range(k):
                        e = s0 + t
                        X[c * k + t] = W[c, ii[e]]
                        Y[c * k + t] = 0.5 * vv[e] * W[c, jj[e]]
                Mrow = &M[grp_row[g], 0]
                for e2 in range(s0, nnz):
                    c = ii[e2]
                    d = jj[e2]
                    xc = X + c * k
                    xd = X + d * k
                    yc = Y + c * k
                    yd = Y + d * k
                    sxy = 0.0
                    for t in range(k):
                        sxy = sxy + xd[t] * yc[t] + xc[t] * yd[t]
                    Mrow[erow[e2]] += vv[e2] * sxy
    finally:
        free(X)
        free(Y)
