# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. ``_kernels_py`` mirrors every function here."""

from libc.math cimport ceil, exp, expm1, fabs, floor, lgamma, log, log1p, sqrt

import numpy as np

ctypedef fused count_t:
    long
    long long
    double

cdef enum:
    EMPIRICAL_TV = 0
    COLLISIONS = 1
    DISTINCT = 2
    CHI_SQUARED = 3

cdef double TAIL_SIGMAS = 40.0


cdef inline double _log_binom_pmf(long m, long k, double logp, double logq, double lgm) nogil:
    return lgm - lgamma(k + 1.0) - lgamma(m - k + 1.0) + k * logp + (m - k) * logq


def tail_excess(long m, double p, double t):
    """E[max(X - t, 0)] for X ~ Bin(m, p), summed in log space."""
    cdef long k, k_lo, k_hi
    cdef double mean, sd, total = 0.0, logp, logq, lgm
    if p <= 0.0:
        return 0.0 if t >= 0.0 else -t
    if p >= 1.0:
        return m - t if m > t else 0.0
    k_lo = <long>ceil(t)
    if k_lo < 0:
        k_lo = 0
    mean = m * p
    sd = sqrt(mean * (1.0 - p))
    if mean - TAIL_SIGMAS * sd - TAIL_SIGMAS > k_lo:
        k_lo = <long>floor(mean - TAIL_SIGMAS * sd - TAIL_SIGMAS)
    k_hi = m
    if mean + TAIL_SIGMAS * sd + TAIL_SIGMAS < k_hi:
        k_hi = <long>ceil(mean + TAIL_SIGMAS * sd + TAIL_SIGMAS)
    logp = log(p)
    logq = log1p(-p)
    lgm = lgamma(m + 1.0)
    with nogil:
        for k in range(k_lo, k_hi + 1):
            total += exp(_log_binom_pmf(m, k, logp, logq, lgm)) * (k - t)
    return total


def hessian_integer(long m, long t, double p):
    """(m-1) C(m-2, t-1) p^(t-1) (1-p)^(m-t-1) for integer t >= 1; 0 at t = 0."""
    if t == 0 or t > m - 1:
        return 0.0
    cdef double logval = (
        log(m - 1.0)
        + lgamma(m - 1.0)
        - lgamma(<double>t)
        - lgamma(<double>(m - t))
    )
    if t - 1 > 0:
        if p <= 0.0:
            return 0.0
        logval += (t - 1) * log(p)
    if m - t - 1 > 0:
        if p >= 1.0:
            return 0.0
        logval += (m - t - 1) * log1p(-p)
    return exp(logval)


def batch_statistic(const count_t[:, ::1] counts, int kind):
    """Evaluate one statistic on every row of a (trials, n) count matrix.

    Row totals play the role of m, so Poissonized rows are handled too.
    Float input is treated as the real relaxation of the statistic, so the
    zero-count shortcut for empirical TV applies to integer counts only.
    """
    cdef Py_ssize_t trials = counts.shape[0], n = counts.shape[1], r, i
    out_arr = np.empty(trials, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double total, acc, x, e
    with nogil:
        for r in range(trials):
            total = 0.0
            for i in range(n):
                total += counts[r, i]
            acc = 0.0
            if kind == EMPIRICAL_TV:
                if total <= 0.0:
                    out[r] = 0.5
                    continue
                if count_t is not double and total <= n:
                    for i in range(n):
                        if counts[r, i] == 0:
                            acc += 1.0
                    out[r] = acc / n
                else:
                    # |n x - m| summed before the single division
                    for i in range(n):
                        acc += fabs(n * <double>counts[r, i] - total)
                    out[r] = acc / (2.0 * n * total)
            elif kind == COLLISIONS:
                if total < 2.0:
                    out[r] = 0.0
                    continue
                for i in range(n):
                    x = counts[r, i]
                    acc += x * (x - 1.0)
                out[r] = acc / (total * (total - 1.0))
            elif kind == DISTINCT:
                for i in range(n):
                    if counts[r, i] > 0:
                        acc += 1.0
                out[r] = -acc
            else:
                if total <= 0.0:
                    out[r] = 0.0
                    continue
                e = total / n
                for i in range(n):
                    x = counts[r, i]
                    acc += (x - e) * (x - e) - x
                out[r] = acc / e
    return out_arr


def poisson_mixture_h2(double lam, double eps, long kmax):
    """H^2(Poi(lam), 0.5 Poi((1+eps) lam) + 0.5 Poi((1-eps) lam)) over k <= kmax."""
    cdef long k
    cdef double loga, a, r, d, x1, x2, hi, lr, total = 0.0
    cdef double lp = log1p(eps), lm = log1p(-eps), le = lam * eps, loglam = log(lam)
    with nogil:
        for k in range(kmax + 1):
            loga = -lam + k * loglam - lgamma(k + 1.0)
            x1 = k * lp - le
            x2 = k * lm + le
            if x1 > 30.0:
                # b/a overflows expm1: a (sqrt(b/a) - 1)^2 = b (1 - sqrt(a/b))^2
                hi = x1 if x1 > x2 else x2
                lr = log(0.5) + hi + log1p(exp(-fabs(x1 - x2)))
                d = expm1(-0.5 * lr)
                total += exp(loga + lr) * d * d
                continue
            a = exp(loga)
            # r = b/a - 1 without forming b directly
            r = 0.5 * (expm1(x1) + expm1(x2))
            d = r / (sqrt(1.0 + r) + 1.0)
            total += a * d * d
    return 0.5 * total
