# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled likelihood kernels; contracts identical to _pykernels."""

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, log, log1p, sqrt, pow, INFINITY

cnp.import_array()

IMPL = "compiled"

cdef double SQRT1_2 = 0.7071067811865475244
cdef double LOG_SQRT_2PI = 0.9189385332046727418


cdef inline double _log_ndtr(double x) nogil:
    """log(Phi(x)), stable across the whole real line."""
    cdef double v, z, x2
    if x > 6.0:
        return log1p(-0.5 * erfc(x * SQRT1_2))
    if x > -37.0:
        v = 0.5 * erfc(-x * SQRT1_2)
        if v > 0.0:
            return log(v)
    if x == -INFINITY:
        return -INFINITY
    # asymptotic expansion of the Mills ratio for the far left tail
    x2 = x * x
    z = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)
    return -0.5 * x2 - log(-x) - LOG_SQRT_2PI + log(z)


def log_ndtr_vec(x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(xs.shape[0])
    cdef Py_ssize_t i
    for i in range(xs.shape[0]):
        out[i] = _log_ndtr(xs[i])
    return out.reshape(np.shape(x))


def sm_loglik(
    cnp.float64_t[::1] beta,
    cnp.float64_t[::1] phi,
    cnp.float64_t[::1] rho,
    cnp.float64_t[:, ::1] Q,
    cnp.float64_t[:, ::1] S,
    cnp.float64_t[:, ::1] prev,
    cnp.int64_t[::1] choice,
    cnp.int64_t[::1] offsets,
):
    cdef Py_ssize_t n_subj = beta.shape[0]
    cdef Py_ssize_t K = Q.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_subj)
    cdef Py_ssize_t s, r, k
    cdef double b, p, rh, m, acc, total, logit_c
    cdef double logits[16]
    if K > 16:
        raise ValueError("sm_loglik kernel supports at most 16 arms")
    with nogil:
        for s in range(n_subj):
            b = beta[s]
            p = phi[s]
            rh = rho[s]
            total = 0.0
            for r in range(offsets[s], offsets[s + 1]):
                m = -INFINITY
                for k in range(K):
                    logits[k] = b * (Q[r, k] + p * S[r, k] + rh * prev[r, k])
                    if logits[k] > m:
                        m = logits[k]
                acc = 0.0
                for k in range(K):
                    acc += exp(logits[k] - m)
                logit_c = logits[choice[r]]
                total += logit_c - m - log(acc)
            out[s] = total
    return out


def probit_loglik(
    cnp.float64_t[::1] w1,
    cnp.float64_t[::1] w2,
    cnp.float64_t[::1] w3,
    cnp.float64_t[::1] V,
    cnp.float64_t[::1] RU,
    cnp.float64_t[::1] VTU,
    cnp.uint8_t[::1] chose_first,
    cnp.int64_t[::1] offsets,
):
    cdef Py_ssize_t n_subj = w1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_subj)
    cdef Py_ssize_t s, r
    cdef double a1, a2, a3, x, total
    with nogil:
        for s in range(n_subj):
            a1 = w1[s]
            a2 = w2[s]
            a3 = w3[s]
            total = 0.0
            for r in range(offsets[s], offsets[s + 1]):
                x = a1 * V[r] + a2 * RU[r] + a3 * VTU[r]
                if not chose_first[r]:
                    x = -x
                total += _log_ndtr(x)
            out[s] = total
    return out


def qcare_loglik(
    cnp.float64_t[::1] alpha,
    cnp.float64_t[::1] dmu,
    cnp.float64_t[::1] n_first,
    cnp.float64_t[::1] n_second,
    cnp.uint8_t[::1] chose_first,
    cnp.uint8_t[::1] included,
    cnp.int64_t[::1] offsets,
):
    cdef Py_ssize_t n_subj = alpha.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_subj)
    cdef Py_ssize_t s, r
    cdef double a, x, noise, total
    with nogil:
        for s in range(n_subj):
            a = alpha[s]
            total = 0.0
            for r in range(offsets[s], offsets[s + 1]):
                if not included[r]:
                    continue
                noise = pow(n_first[r] + 1.0, -2.0 * a) + pow(n_second[r] + 1.0, -2.0 * a)
                x = dmu[r] / sqrt(noise)
                if not chose_first[r]:
                    x = -x
                total += _log_ndtr(x)
            out[s] = total
    return out
