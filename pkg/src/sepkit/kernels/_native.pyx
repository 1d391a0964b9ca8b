# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pure.py``.

Tight scalar loops beat the vectorized fallback on the short sequences
this toolkit trains on; results are required (and tested) to match the
pure backend to floating-point equality of algorithm, not of rounding
order, hence the shared summation order below mirrors _pure.py.
"""

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport exp, expm1, isinf, log, log1p

cnp.import_array()

ctypedef fused floating:
    float
    double


cdef inline double _logaddexp(double a, double b) nogil:
    if isinf(a) and a < 0:
        return b
    if isinf(b) and b < 0:
        return a
    if a < b:
        a, b = b, a
    return a + log1p(exp(b - a))


def depthwise_conv1d_forward(floating[:, ::1] x, floating[:, ::1] k):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t C = x.shape[1]
    cdef Py_ssize_t K = k.shape[1]
    cdef Py_ssize_t pad = K // 2
    if floating is float:
        y_arr = np.zeros((T, C), dtype=np.float32)
    else:
        y_arr = np.zeros((T, C), dtype=np.float64)
    cdef floating[:, ::1] y = y_arr
    cdef Py_ssize_t t, c, j, src
    with nogil:
        for t in range(T):
            for j in range(K):
                src = t + j - pad
                if src < 0 or src >= T:
                    continue
                for c in range(C):
                    y[t, c] += x[src, c] * k[c, j]
    return y_arr


def depthwise_conv1d_backward(floating[:, ::1] x, floating[:, ::1] k,
                              floating[:, ::1] gy):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t C = x.shape[1]
    cdef Py_ssize_t K = k.shape[1]
    cdef Py_ssize_t pad = K // 2
    if floating is float:
        gx_arr = np.zeros((T, C), dtype=np.float32)
        gk_arr = np.zeros((C, K), dtype=np.float32)
    else:
        gx_arr = np.zeros((T, C), dtype=np.float64)
        gk_arr = np.zeros((C, K), dtype=np.float64)
    cdef floating[:, ::1] gx = gx_arr
    cdef floating[:, ::1] gk = gk_arr
    cdef Py_ssize_t t, c, j, src
    with nogil:
        for t in range(T):
            for j in range(K):
                src = t + j - pad
                if src < 0 or src >= T:
                    continue
                for c in range(C):
                    gx[src, c] += gy[t, c] * k[c, j]
                    gk[c, j] += gy[t, c] * x[src, c]
    return gx_arr, gk_arr


def ctc_forward_backward(double[:, ::1] log_probs, long[::1] ext_labels,
                         long blank):
    cdef Py_ssize_t T = log_probs.shape[0]
    cdef Py_ssize_t V = log_probs.shape[1]
    cdef Py_ssize_t S = ext_labels.shape[0]
    cdef double NEG = -np.inf

    skip_arr = np.zeros(S, dtype=np.uint8)
    cdef unsigned char[::1] skip_ok = skip_arr
    cdef Py_ssize_t s, t
    for s in range(2, S):
        if ext_labels[s] != blank and ext_labels[s] != ext_labels[s - 2]:
            skip_ok[s] = 1

    alpha_arr = np.full((T, S), NEG)
    beta_arr = np.full((T, S), NEG)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double acc, log_z

    with nogil:
        alpha[0, 0] = log_probs[0, ext_labels[0]]
        if S > 1:
            alpha[0, 1] = log_probs[0, ext_labels[1]]
        for t in range(1, T):
            for s in range(S):
                acc = alpha[t - 1, s]
                if s >= 1:
                    acc = _logaddexp(acc, alpha[t - 1, s - 1])
                if s >= 2 and skip_ok[s]:
                    acc = _logaddexp(acc, alpha[t - 1, s - 2])
                alpha[t, s] = acc + log_probs[t, ext_labels[s]]

    log_z = alpha[T - 1, S - 1]
    if S > 1:
        log_z = _logaddexp(log_z, alpha[T - 1, S - 2])
    if not np.isfinite(log_z):
        return np.inf, np.zeros((T, V))

    grad_arr = np.zeros((T, V))
    cdef double[:, ::1] grad = grad_arr
    cdef double nxt_stay, nxt_move, nxt_skip

    with nogil:
        beta[T - 1, S - 1] = 0.0
        if S > 1:
            beta[T - 1, S - 2] = 0.0
        for t in range(T - 2, -1, -1):
            for s in range(S):
                acc = beta[t + 1, s] + log_probs[t + 1, ext_labels[s]]
                if s + 1 < S:
                    acc = _logaddexp(
                        acc, beta[t + 1, s + 1] + log_probs[t + 1, ext_labels[s + 1]])
                if s + 2 < S and skip_ok[s + 2]:
                    acc = _logaddexp(
                        acc, beta[t + 1, s + 2] + log_probs[t + 1, ext_labels[s + 2]])
                beta[t, s] = acc
        for t in range(T):
            for s in range(S):
                grad[t, ext_labels[s]] -= exp(alpha[t, s] + beta[t, s] - log_z)

    return float(-log_z), grad_arr
