# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
"""Compiled inner loops.

Hot kernels shared by the filters and the GP code: pairwise squared
distances, fused covariance (Gram) blocks, per-particle scalar-Gaussian
log-likelihoods, and the systematic-resampling index walk.
``bayesfilt.backend`` falls back to the NumPy mirrors in
``bayesfilt._core_py`` when this module has not been built.
"""

import numpy as np

from libc.math cimport M_PI, exp, log, pow, sin


def pairwise_sqdist(double[::1] x, double[::1] y):
    """Matrix of (x_i - y_j)**2 for 1-D inputs."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t i, j
    cdef double d
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            d = x[i] - y[j]
            o[i, j] = d * d
    return out


def exp_quad_gram(double[::1] x, double[::1] y, double amp2, double gamma):
    """amp2 * exp(-gamma * (x_i - y_j)**2)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t i, j
    cdef double d, t
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            d = x[i] - y[j]
            t = d * d
            o[i, j] = amp2 * exp(-(gamma * t))
    return out


def periodic_gram(double[::1] x, double[::1] y, double amp2,
                  double gamma_per, double gamma_decay):
    """amp2 * exp(-gamma_per*sin^2(pi d) - gamma_decay*d^2), d = x_i - y_j."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t i, j
    cdef double d, s
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            d = x[i] - y[j]
            s = sin(M_PI * d)
            o[i, j] = amp2 * exp(-(gamma_per * (s * s)) - (gamma_decay * (d * d)))
    return out


def rq_gram(double[::1] x, double[::1] y, double amp2, double shape,
            double len2):
    """amp2 * (1 + d^2/(2*shape*len2))**(-shape), d = x_i - y_j."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = y.shape[0]
    cdef Py_ssize_t i, j
    cdef double d, b
    cdef double c = 1.0 / (2.0 * shape * len2)
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        for j in range(m):
            d = x[i] - y[j]
            b = 1.0 + (d * d) * c
            o[i, j] = amp2 * pow(b, -shape)
    return out


def gauss_loglik(double z, double[::1] means, double var):
    """log N(z; means_i, var) for every i."""
    cdef Py_ssize_t n = means.shape[0]
    cdef Py_ssize_t i
    cdef double c = -0.5 * log(2.0 * M_PI * var)
    cdef double inv2v = 0.5 / var
    cdef double d
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        d = z - means[i]
        o[i] = c - (d * d) * inv2v
    return out


def resample_indices(double[::1] cumsum, double u0):
    """Systematic-resampling ancestor indices.

    Walks the stratified uniforms u_j = u0 + j/n (j = 0..n-1) along the
    cumulative weight sum; index j gets the first i with cumsum[i] >= u_j.
    """
    cdef Py_ssize_t n = cumsum.shape[0]
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t j
    cdef double u
    cdef double nd = <double> n
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    for j in range(n):
        u = u0 + (<double> j) / nd
        while u > cumsum[i] and i < n - 1:
            i += 1
        o[j] = i
    return out
