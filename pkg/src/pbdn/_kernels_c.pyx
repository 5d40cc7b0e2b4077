# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled count kernels.

Every kernel consumes uniforms drawn by the caller, so results are identical
to the numpy versions in ``_kernels_py`` for the same input arrays.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport expm1

cnp.import_array()


def crt_counts(const cnp.int64_t[::1] counts, const double[::1] conc,
               const double[::1] uniforms):
    cdef Py_ssize_t n = counts.shape[0]
    cdef Py_ssize_t i, j, pos = 0
    cdef cnp.int64_t tables
    cdef double c
    out = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    for i in range(n):
        c = conc[i]
        tables = 0
        for j in range(counts[i]):
            if uniforms[pos] < c / (c + <double>j):
                tables += 1
            pos += 1
        res[i] = tables
    return out


def ztp_inversion(const double[::1] rates, const double[::1] uniforms,
                  cnp.int64_t max_steps):
    cdef Py_ssize_t n = rates.shape[0]
    cdef Py_ssize_t i
    cdef cnp.int64_t k
    cdef double lam, p, cum, u
    out = np.ones(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    for i in range(n):
        lam = rates[i]
        u = uniforms[i]
        p = lam / expm1(lam)
        cum = p
        k = 1
        while u >= cum and k < max_steps:
            k += 1
            p = p * lam / <double>k
            cum = cum + p
        res[i] = k
    return out


def partition_counts(const cnp.int64_t[::1] totals, const double[:, ::1] weights,
                     const double[::1] uniforms):
    cdef Py_ssize_t n = weights.shape[0]
    cdef Py_ssize_t K = weights.shape[1]
    cdef Py_ssize_t i, j, k, last, pos = 0
    cdef double target
    out = np.zeros((n, K), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] res = out
    cdef double[::1] cw = np.empty(K, dtype=np.float64)
    for i in range(n):
        if totals[i] == 0:
            continue
        last = 0
        cw[0] = weights[i, 0]
        if weights[i, 0] > 0:
            last = 0
        for k in range(1, K):
            cw[k] = cw[k - 1] + weights[i, k]
            if weights[i, k] > 0:
                last = k
        for j in range(totals[i]):
            target = uniforms[pos] * cw[K - 1]
            pos += 1
            k = 0
            while k < K and cw[k] <= target:
                k += 1
            if k >= K:
                k = last
            res[i, k] += 1
    return out
