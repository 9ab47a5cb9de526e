# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled expansion hot paths; same API and summation order as ``_pykernels``."""

from libc.stdint cimport int64_t


def matched_mass(const double[::1] coef, const double[:, ::1] w, const double[:, :, ::1] rows,
                 const int64_t[:, ::1] xs, Py_ssize_t K, const int64_t[::1] x_idx, index,
                 double[:, ::1] out):
    # a linear scan over the contiguous observation matrix beats walking
    # Python index lists from C; ``index`` is accepted for API parity
    return matched_mass_scan(coef, w, rows, xs, K, x_idx, out)


def matched_mass_scan(const double[::1] coef, const double[:, ::1] w, const double[:, :, ::1] rows,
                      const int64_t[:, ::1] xs, Py_ssize_t K, const int64_t[::1] x_idx,
                      double[:, ::1] out):
    cdef Py_ssize_t i, m, q
    cdef Py_ssize_t M = rows.shape[1], Q = rows.shape[2]
    cdef double c
    out[:, :] = 0.0
    for i in range(K):
        for m in range(M):
            if xs[i, m] == x_idx[m]:
                c = coef[i] * w[i, m]
                for q in range(Q):
                    out[m, q] += c * rows[i, m, q]
    return out.base


def quantized_mass(const double[::1] coef, const double[:, ::1] w, const double[:, :, ::1] rows,
                   Py_ssize_t K, const int64_t[::1] q_idx, double[::1] out):
    cdef Py_ssize_t i, m
    cdef Py_ssize_t M = rows.shape[1]
    out[:] = 0.0
    for i in range(K):
        for m in range(M):
            out[m] += coef[i] * w[i, m] * rows[i, m, q_idx[m]]
    return out.base


def grouped_norm(const double[::1] coef, const double[:, ::1] w, const double[:, :, ::1] rows,
                 const int64_t[:, ::1] xs, Py_ssize_t K, Py_ssize_t n_x, bint x_indicator):
    cdef Py_ssize_t i, m, q, g
    cdef Py_ssize_t M = rows.shape[1], Q = rows.shape[2]
    cdef Py_ssize_t G = n_x if x_indicator else 1
    cdef double c, total = 0.0
    import numpy as np
    cdef double[:, ::1] acc = np.zeros((G, Q))
    for m in range(M):
        acc[:, :] = 0.0
        for i in range(K):
            g = xs[i, m] if x_indicator else 0
            c = coef[i] * w[i, m]
            for q in range(Q):
                acc[g, q] += c * rows[i, m, q]
        for g in range(G):
            for q in range(Q):
                total += acc[g, q] * acc[g, q]
    return total
