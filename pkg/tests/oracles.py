"""Independent reference computations used by the tests.

Nothing here calls into the package: expectations come from enumerating every
sample sequence, exact statistics from rational arithmetic, and binomial sums
from scipy.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.stats import binom, poisson


def all_sequences(n: int, m: int) -> np.ndarray:
    """Every sequence in [n]^m as rows of an (n**m, m) array."""
    return np.array(list(itertools.product(range(n), repeat=m)), dtype=np.int64).reshape(-1, m)


def enumerate_mu_t(p, m: int, t: float) -> float:
    """E[(1/m) sum_i max(X_i - t, 0)] by summing over all n^m sequences."""
    p = np.asarray(p, dtype=float)
    n = p.size
    seqs = all_sequences(n, m)
    probs = np.prod(p[seqs], axis=1)
    counts = np.stack([(seqs == i).sum(axis=1) for i in range(n)], axis=1)
    vals = np.maximum(counts - t, 0.0).sum(axis=1) / m
    return math.fsum(probs * vals)


def enumerate_mu_uniform(n: int, m: int) -> float:
    """E[S] under U_n with S = 1/2 sum |X_i/m - 1/n|, by enumeration."""
    seqs = all_sequences(n, m)
    counts = np.stack([(seqs == i).sum(axis=1) for i in range(n)], axis=1)
    s = 0.5 * np.abs(counts / m - 1.0 / n).sum(axis=1)
    return math.fsum(s) / seqs.shape[0]


def exact_tv_statistic(counts) -> Fraction:
    counts = [int(c) for c in counts]
    n, m = len(counts), sum(counts)
    return sum((abs(Fraction(c, m) - Fraction(1, n)) for c in counts), Fraction(0)) / 2


def binom_tail_term(m: int, p: float, t: float) -> float:
    """E[max(X - t, 0)] / m for X ~ Bin(m, p), via scipy's pmf."""
    k = np.arange(math.ceil(t), m + 1)
    return math.fsum(binom.pmf(k, m, p) * (k - t)) / m


def hessian_closed_form(m: int, t: int, p: float) -> float:
    """(m-1) C(m-2, t-1) p^(t-1) (1-p)^(m-t-1) with exact integer binomials."""
    if t == 0:
        return 0.0
    return (m - 1) * math.comb(m - 2, t - 1) * p ** (t - 1) * (1 - p) ** (m - t - 1)


def poisson_mixture_h2_direct(lam: float, eps: float, kmax: int) -> float:
    k = np.arange(kmax + 1)
    a = poisson.pmf(k, lam)
    b = 0.5 * poisson.pmf(k, (1 + eps) * lam) + 0.5 * poisson.pmf(k, (1 - eps) * lam)
    return 0.5 * float(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2))


def clopper_pearson_upper_bisect(k: int, n: int, alpha: float) -> float:
    """Upper bound u with P[Bin(n, u) <= k] = alpha, by bisection on the cdf."""
    if k >= n:
        return 1.0
    lo, hi = k / n, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if binom.cdf(k, n, mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_doubly_stochastic(n: int, rng: np.random.Generator, terms: int = 4) -> np.ndarray:
    weights = rng.dirichlet(np.ones(terms))
    out = np.zeros((n, n))
    for w in weights:
        out[np.arange(n), rng.permutation(n)] += w
    return out


def family_gap_exact(n: int, m: int, eps: float, k: int) -> float:
    """mu(p) - mu(U_n) for the two-valued family member with k heavy masses, via scipy."""
    heavy = 1.0 / n + eps / k
    light = 1.0 / n - eps / (n - k)
    t = m / n
    mu_p = k * binom_tail_term(m, heavy, t) + (n - k) * binom_tail_term(m, max(light, 0.0), t)
    mu_u = n * binom_tail_term(m, 1.0 / n, t)
    return mu_p - mu_u
