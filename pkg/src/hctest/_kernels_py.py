"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and results match the compiled module; this one is selected when
the extension is not built or ``HCTEST_PURE_PYTHON`` is set.
"""

import math

import numpy as np
from scipy.special import gammaln

EMPIRICAL_TV, COLLISIONS, DISTINCT, CHI_SQUARED = range(4)
_TAIL_SIGMAS = 40.0


def tail_excess(m, p, t):
    """E[max(X - t, 0)] for X ~ Bin(m, p), summed in log space."""
    if p <= 0.0:
        return 0.0 if t >= 0.0 else -t
    if p >= 1.0:
        return float(m - t) if m > t else 0.0
    mean = m * p
    sd = math.sqrt(mean * (1.0 - p))
    k_lo = max(0, math.ceil(t))
    if mean - _TAIL_SIGMAS * sd - _TAIL_SIGMAS > k_lo:
        k_lo = math.floor(mean - _TAIL_SIGMAS * sd - _TAIL_SIGMAS)
    k_hi = m
    if mean + _TAIL_SIGMAS * sd + _TAIL_SIGMAS < k_hi:
        k_hi = math.ceil(mean + _TAIL_SIGMAS * sd + _TAIL_SIGMAS)
    if k_hi < k_lo:
        return 0.0
    k = np.arange(k_lo, k_hi + 1, dtype=np.float64)
    logpmf = (
        math.lgamma(m + 1.0)
        - gammaln(k + 1.0)
        - gammaln(m - k + 1.0)
        + k * math.log(p)
        + (m - k) * math.log1p(-p)
    )
    return float(np.sum(np.exp(logpmf) * (k - t)))


def hessian_integer(m, t, p):
    """(m-1) C(m-2, t-1) p^(t-1) (1-p)^(m-t-1) for integer t >= 1; 0 at t = 0."""
    if t == 0 or t > m - 1:
        return 0.0
    logval = math.log(m - 1.0) + math.lgamma(m - 1.0) - math.lgamma(t) - math.lgamma(m - t)
    if t - 1 > 0:
        if p <= 0.0:
            return 0.0
        logval += (t - 1) * math.log(p)
    if m - t - 1 > 0:
        if p >= 1.0:
            return 0.0
        logval += (m - t - 1) * math.log1p(-p)
    return math.exp(logval)


def batch_statistic(counts, kind):
    """Evaluate one statistic on every row of a (trials, n) count matrix."""
    counts = np.asarray(counts)
    n = counts.shape[1]
    x = counts.astype(np.float64, copy=False)
    total = x.sum(axis=1)
    safe = np.where(total > 0, total, 1.0)
    if kind == EMPIRICAL_TV:
        spread = np.abs(n * x - total[:, None]).sum(axis=1) / (2.0 * n * safe)
        if np.issubdtype(counts.dtype, np.integer):
            zeros = np.count_nonzero(counts == 0, axis=1) / n
            out = np.where(total <= n, zeros, spread)
        else:
            out = spread
        return np.where(total > 0, out, 0.5)
    if kind == COLLISIONS:
        pairs = (x * (x - 1.0)).sum(axis=1)
        denom = np.where(total >= 2, total * (total - 1.0), 1.0)
        return np.where(total >= 2, pairs / denom, 0.0)
    if kind == DISTINCT:
        return -np.count_nonzero(counts > 0, axis=1).astype(np.float64)
    if kind == CHI_SQUARED:
        e = safe / n
        acc = ((x - e[:, None]) ** 2 - x).sum(axis=1)
        return np.where(total > 0, acc / e, 0.0)
    raise ValueError(f"unknown statistic code {kind}")


def poisson_mixture_h2(lam, eps, kmax):
    """H^2(Poi(lam), 0.5 Poi((1+eps) lam) + 0.5 Poi((1-eps) lam)) over k <= kmax."""
    k = np.arange(kmax + 1, dtype=np.float64)
    loga = -lam + k * math.log(lam) - gammaln(k + 1.0)
    le = lam * eps
    x1 = k * math.log1p(eps) - le
    x2 = k * math.log1p(-eps) + le
    big = x1 > 30.0
    with np.errstate(over="ignore", invalid="ignore"):
        r = 0.5 * (np.expm1(x1) + np.expm1(x2))
        d = r / (np.sqrt(1.0 + r) + 1.0)
        near = np.exp(loga) * d * d
    # b/a overflows expm1: a (sqrt(b/a) - 1)^2 = b (1 - sqrt(a/b))^2
    lr = math.log(0.5) + np.logaddexp(x1, x2)
    far = np.exp(loga + lr) * np.expm1(-0.5 * lr) ** 2
    return float(0.5 * np.sum(np.where(big, far, near)))
