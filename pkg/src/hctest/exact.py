"""Exact expectations of the empirical-TV statistic, its Hessian, gap bounds,
thresholds and bounded-difference tail bounds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import DiscreteDistribution, DomainMismatch, HCTestError, Histogram, Kind


class ParameterOutOfRange(HCTestError):
    pass


class TOutOfRange(ParameterOutOfRange):
    pass


class Regime(str, enum.Enum):
    SMALL = "SMALL"  # m <= n
    MID = "MID"  # n < m < n / eps^2
    LARGE = "LARGE"  # m >= n / eps^2


@dataclass(frozen=True)
class GapBound:
    regime: Regime
    value: float
    constant_used: float


@dataclass(frozen=True)
class TailBoundQuery:
    z: float
    B: float
    m: int
    per_sample_variances: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.z < 0 or self.B <= 0:
            raise ParameterOutOfRange("need z >= 0 and B > 0")
        if self.per_sample_variances is not None and min(self.per_sample_variances, default=0) < 0:
            raise ParameterOutOfRange("variances must be nonnegative")

    def mcdiarmid(self) -> float:
        return mcdiarmid_bound(self.z, self.m, self.B)

    def bernstein(self) -> float:
        if self.per_sample_variances is None:
            raise ParameterOutOfRange("Bernstein form needs per-sample variances")
        return bernstein_mcdiarmid_bound(self.z, self.B, math.fsum(self.per_sample_variances))


def statistic_empirical_tv(hist: Histogram, n: int | None = None) -> float:
    """Total variation between the empirical distribution and uniform.

    Uses the zero-count form ``#{i : X_i = 0} / n`` when the sample size is at
    most ``n``.
    """
    if n is not None and n != hist.n:
        raise DomainMismatch(f"histogram has {hist.n} bins, expected {n}")
    return float(kernels.batch_statistic(hist.counts.reshape(1, -1), kernels.EMPIRICAL_TV)[0])


def mu_uniform(n: int, m: int) -> float:
    """E[S] under ``m`` samples from the uniform distribution on ``n`` elements.

    O(m): by symmetry only one coordinate's excess over ``m/n`` is summed.
    """
    if n < 1 or m < 1:
        raise ParameterOutOfRange("need n >= 1 and m >= 1")
    if n == 1:
        return 0.0
    return n * kernels.tail_excess(m, 1.0 / n, m / n) / m


def mu_t_coordinate(m: int, p_i: float, t: float) -> float:
    """One coordinate's share of ``mu_t``: E[max(X - t, 0)] / m with X ~ Bin(m, p_i)."""
    if m < 1:
        raise ParameterOutOfRange("m must be at least 1")
    if not 0 <= p_i <= 1:
        raise ParameterOutOfRange("p_i must lie in [0, 1]")
    return kernels.tail_excess(m, float(p_i), float(t)) / m


def mu_t_exact(p: DiscreteDistribution, m: int, t: float) -> float:
    """E[(1/m) sum_i max(X_i - t, 0)] for X ~ Multinomial(m, p).

    Coordinates sharing a probability value are evaluated once, so
    distributions with few distinct masses cost O(m).
    """
    if p.kind is not Kind.TRUE:
        raise HCTestError("mu_t_exact needs a true distribution")
    if m < 1:
        raise ParameterOutOfRange("m must be at least 1")
    if not 0 <= t <= m:
        raise TOutOfRange(f"t={t} outside [0, {m}]")
    values, counts = np.unique(p.weights, return_counts=True)
    total = math.fsum(c * kernels.tail_excess(m, float(v), float(t)) for v, c in zip(values, counts))
    return total / m


def mu_exact(p: DiscreteDistribution, m: int) -> float:
    """E[S] under ``m`` samples from ``p``."""
    return mu_t_exact(p, m, m / p.n)


def hessian_entry(m: int, t: float, p_i: float) -> float:
    """Diagonal Hessian entry of ``mu_t`` in coordinate ``p_i``.

    Closed form at integer ``t``; linear interpolation between the two
    neighbouring integers otherwise (with the value 0 at ``t = 0``).
    """
    if m < 2:
        raise ParameterOutOfRange("m must be at least 2")
    if not 0 <= t <= m - 1:
        raise ParameterOutOfRange(f"t={t} outside [0, {m - 1}]")
    if t >= 1 and m < 3:
        raise ParameterOutOfRange("t >= 1 needs m >= 3")
    if not 0 < p_i < 1:
        raise ParameterOutOfRange("p_i must lie in (0, 1)")
    lo, hi = math.floor(t), math.ceil(t)
    if lo == hi:
        return kernels.hessian_integer(m, int(t), p_i)
    gap = hi - t
    return gap * kernels.hessian_integer(m, lo, p_i) + (1.0 - gap) * kernels.hessian_integer(m, hi, p_i)


def regime(n: int, m: int, epsilon: float) -> Regime:
    if m <= n:
        return Regime.SMALL
    # m >= n/eps^2, with ties resolved to LARGE despite rounding in eps^2
    if m * epsilon * epsilon >= n * (1.0 - 1e-12):
        return Regime.LARGE
    return Regime.MID


def regime_formula(n: int, m: int, epsilon: float) -> tuple[Regime, float]:
    """The piecewise gap shape ``eps^2 m^2/n^2``, ``eps^2 sqrt(m/n)`` or ``eps``."""
    r = regime(n, m, epsilon)
    if r is Regime.SMALL:
        return r, epsilon**2 * m**2 / n**2
    if r is Regime.MID:
        return r, epsilon**2 * math.sqrt(m / n)
    return r, epsilon


def _check_gap_args(n, m, epsilon, constant):
    if not 0 < epsilon <= 1:
        raise ParameterOutOfRange("epsilon must lie in (0, 1]")
    if constant < 0:
        raise ParameterOutOfRange("constant must be nonnegative")
    if n < 1 or m < 1:
        raise ParameterOutOfRange("need n >= 1 and m >= 1")


def expectation_gap_bound(n: int, m: int, epsilon: float, constant: float) -> GapBound:
    """Lower bound on ``mu(p) - mu(U_n)`` for any ``p`` at distance ``epsilon``."""
    if m < 6 or n < 2:
        raise ParameterOutOfRange("the gap bound holds for m >= 6 and n >= 2")
    _check_gap_args(n, m, epsilon, constant)
    r, shape = regime_formula(n, m, epsilon)
    return GapBound(r, constant * shape, constant)


def threshold(n: int, m: int, epsilon: float, constant: float, mu_u: float | None = None) -> float:
    """Acceptance threshold halfway between ``mu(U_n)`` and the gap bound.

    Unlike :func:`expectation_gap_bound` this accepts ``m < 6`` so that
    undersized samples can still be evaluated.
    """
    _check_gap_args(n, m, epsilon, constant)
    if mu_u is None:
        mu_u = mu_uniform(n, m)
    _, shape = regime_formula(n, m, epsilon)
    return mu_u + 0.5 * constant * shape


def mcdiarmid_bound(z: float, m: int, B: float) -> float:
    if z < 0 or B <= 0 or m < 1:
        raise ParameterOutOfRange("need z >= 0, B > 0, m >= 1")
    return math.exp(-2.0 * z * z / (m * B * B))


def bernstein_mcdiarmid_bound(z: float, B: float, sum_sigma2: float) -> float:
    if z < 0 or B <= 0 or sum_sigma2 < 0:
        raise ParameterOutOfRange("need z >= 0, B > 0, sum_sigma2 >= 0")
    if z == 0:
        return 1.0
    return math.exp(-z * z / (2.0 * sum_sigma2 + 2.0 * B * z / 3.0))
