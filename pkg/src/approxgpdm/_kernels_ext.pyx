# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled squared-exponential kernel loops.

Points are rows. Every routine mirrors a function in ``_kernels_py`` with the
same name and signature; the two are checked against each other in the tests.
"""
import numpy as np
from libc.math cimport exp


def se_cross(const double[:, ::1] A, const double[:, ::1] B,
             double signal_var, const double[::1] inv_ls2):
    """Cross-covariance ``signal_var * exp(-sum_k inv_ls2[k] (a_k - b_k)^2)``."""
    cdef Py_ssize_t na = A.shape[0]
    cdef Py_ssize_t nb = B.shape[0]
    cdef Py_ssize_t d = A.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(na):
            for j in range(nb):
                s = 0.0
                for k in range(d):
                    diff = A[i, k] - B[j, k]
                    s = s + diff * diff * inv_ls2[k]
                o[i, j] = signal_var * exp(-s)
    return out


def se_sym(const double[:, ::1] A, double signal_var, const double[::1] inv_ls2):
    """Symmetric Gram matrix of ``A`` with itself; the diagonal is exact."""
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t d = A.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff, v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            o[i, i] = signal_var
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    diff = A[i, k] - A[j, k]
                    s = s + diff * diff * inv_ls2[k]
                v = signal_var * exp(-s)
                o[i, j] = v
                o[j, i] = v
    return out


def sq_diff_per_dim(const double[:, ::1] A, const double[:, ::1] B):
    """Stack of squared coordinate differences, shape ``(d, na, nb)``."""
    cdef Py_ssize_t na = A.shape[0]
    cdef Py_ssize_t nb = B.shape[0]
    cdef Py_ssize_t d = A.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double diff
    out = np.empty((d, na, nb), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    with nogil:
        for k in range(d):
            for i in range(na):
                for j in range(nb):
                    diff = A[i, k] - B[j, k]
                    o[k, i, j] = diff * diff
    return out
