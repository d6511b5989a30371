"""Lower-bound instances and certificates.

The hard alternative is a random pseudo-distribution with every weight at
``(1 +- eps)/n`` and total mass within ``eps/2`` of one, observed through
Poissonized counts. The Hellinger distance between one Poissonized
coordinate under the null and under the alternative has an exact series,
independent coordinates compose multiplicatively, and a Hellinger bound
turns into a total-variation bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import poisson

from . import kernels
from .core import DiscreteDistribution, HCTestError, Kind, substream, validate
from .montecarlo import map_blocks

MAX_ATTEMPTS = 10**6
TAIL_MASS = 1e-12


class GenerationFailed(HCTestError):
    pass


class TruncationInsufficient(HCTestError):
    pass


class EntryOutOfRange(HCTestError):
    pass


@dataclass(frozen=True)
class LowerBoundInstance:
    w: DiscreteDistribution
    epsilon: float
    accepted: bool
    rejections: int
    seed: int | None = None

    @property
    def heavy(self) -> np.ndarray:
        return self.w.weights > 1.0 / self.w.n

    def to_json(self) -> dict:
        out = self.w.to_json()
        out.update(epsilon=self.epsilon, rejections=self.rejections, accepted=self.accepted, seed=self.seed)
        return out


def _sum_ok(heavy_count: np.ndarray | int, n: int) -> np.ndarray | bool:
    # total mass is 1 + eps (2h - n)/n; |.| <= eps/2  <=>  2|2h - n| <= n
    return 2 * np.abs(2 * np.asarray(heavy_count) - n) <= n


def lb_instance(n: int, epsilon: float, seed: int, max_attempts: int = MAX_ATTEMPTS) -> LowerBoundInstance:
    """Draw each weight as ``(1 + eps)/n`` or ``(1 - eps)/n`` by a fair coin,
    redrawing the whole vector until the total is within ``eps/2`` of one.
    """
    if n < 2:
        raise HCTestError("need n >= 2")
    if not 0 < epsilon < 1:
        raise HCTestError("epsilon must lie in (0, 1)")
    rng = substream(seed, 0x1B)
    for attempt in range(max_attempts):
        signs = rng.random(n) < 0.5
        if _sum_ok(int(signs.sum()), n):
            w = np.where(signs, (1.0 + epsilon) / n, (1.0 - epsilon) / n)
            return LowerBoundInstance(validate(w, Kind.PSEUDO), epsilon, True, attempt, seed)
    raise GenerationFailed(f"no admissible instance after {max_attempts} attempts")


def sample_lb_block(n: int, epsilon: float, m: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Poissonized counts, each row from a freshly drawn admissible instance."""
    signs = rng.random((size, n)) < 0.5
    bad = ~_sum_ok(signs.sum(axis=1), n)
    while bad.any():
        signs[bad] = rng.random((int(bad.sum()), n)) < 0.5
        bad = ~_sum_ok(signs.sum(axis=1), n)
    rates = np.where(signs, (1.0 + epsilon) * m / n, (1.0 - epsilon) * m / n)
    return rng.poisson(rates)


def auto_truncation(lam: float, epsilon: float) -> int:
    top = lam * (1.0 + epsilon)
    return math.ceil(top + 40.0 * math.sqrt(top) + 40.0)


def hellinger2_poisson_mixture(lam: float, epsilon: float, truncation: int | None = None) -> float:
    """Squared Hellinger distance between ``Poi(lam)`` and the even mixture of
    ``Poi((1 + eps) lam)`` and ``Poi((1 - eps) lam)``, summed over ``0..truncation``.
    """
    if not lam > 0:
        raise HCTestError("lambda must be positive")
    if not 0 <= epsilon < 1:
        raise HCTestError("epsilon must lie in [0, 1)")
    if epsilon == 0:
        return 0.0
    if truncation is None:
        truncation = auto_truncation(lam, epsilon)
    tail = float(poisson.sf(truncation, lam * (1.0 + epsilon)))
    if tail >= TAIL_MASS:
        raise TruncationInsufficient(f"tail mass {tail:.3g} beyond k={truncation} is not below {TAIL_MASS}")
    return min(1.0, kernels.poisson_mixture_h2(lam, epsilon, int(truncation)))


def tv_upper_from_hellinger(h2: float) -> float:
    """``1 - (1 - h2)^2 / 2``."""
    if not 0 <= h2 <= 1:
        raise EntryOutOfRange("h2 must lie in [0, 1]")
    d = 1.0 - h2
    return 1.0 - d * d / 2.0


def composed_hellinger2(per_coord_h2: Sequence[float]) -> float:
    """Squared Hellinger distance of a product of independent coordinates."""
    h = np.asarray(per_coord_h2, dtype=float)
    if h.size and (h.min() < 0 or h.max() > 1):
        raise EntryOutOfRange("entries must lie in [0, 1]")
    if np.any(h == 1.0):
        return 1.0
    return float(-np.expm1(np.sum(np.log1p(-h))))


def lower_bound_samples(n: int, epsilon: float, delta: float, constant: float = 1.0) -> int:
    """``constant * (sqrt(n log(1/delta)) + log(1/delta)) / eps^2``, rounded up.

    A certificate that fewer samples cannot suffice (up to the constant), not a
    guarantee that this many do.
    """
    if n < 1 or not 0 < epsilon <= 1 or not 0 < delta < 1 or constant <= 0:
        raise HCTestError("invalid parameters")
    log_inv = math.log(1.0 / delta)
    return math.ceil(constant * (math.sqrt(n * log_inv) + log_inv) / epsilon**2 * (1.0 - 1e-12))


# -- coin reduction -------------------------------------------------------------


def coin_instance(n: int, epsilon: float, biased: bool = True) -> DiscreteDistribution:
    """First half of the domain at ``(1 + eps)/n``, second half at ``(1 - eps)/n``.

    For odd ``n`` the last element is pinned at ``1/n`` and the halves are taken
    over the first ``n - 1`` elements. ``biased=False`` gives the uniform law.
    """
    if n < 2:
        raise HCTestError("need n >= 2")
    e = epsilon if biased else 0.0
    even = n - (n % 2)
    w = np.full(n, 1.0 / n)
    w[: even // 2] = (1.0 + e) / n
    w[even // 2 : even] = (1.0 - e) / n
    return validate(w)


def coin_flips(counts: np.ndarray) -> np.ndarray:
    """Map histogram rows to ``(heads, tails)``: counts in the first and second half.

    Given ``heads + tails`` flips, heads is ``Bin(flips, (1 + eps)/2)``.
    """
    counts = np.atleast_2d(counts)
    n = counts.shape[1]
    even = n - (n % 2)
    return np.stack(
        [counts[:, : even // 2].sum(axis=1), counts[:, even // 2 : even].sum(axis=1)], axis=1
    )


# -- indistinguishability witness ---------------------------------------------------


@dataclass(frozen=True)
class ThresholdRule:
    threshold: float
    reject_above: bool  # reject on the side of large statistic values
    strict: bool  # cut excludes the threshold itself from the rejected side
    type1: float
    type2: float

    @property
    def total_error(self) -> float:
        return self.type1 + self.type2


def best_threshold_rule(null: np.ndarray, alt: np.ndarray) -> ThresholdRule:
    """The single-threshold rule with smallest type-I plus type-II error.

    Scans every cut point in both orientations, with both strict and
    non-strict comparisons.
    """
    null = np.sort(np.asarray(null, dtype=float))
    alt = np.sort(np.asarray(alt, dtype=float))
    cuts = np.concatenate([np.union1d(null, alt), [np.inf]])
    best = None
    for side in ("left", "right"):
        # fraction strictly below the cut ("left") or at most the cut ("right")
        f0 = np.searchsorted(null, cuts, side=side) / null.size
        f1 = np.searchsorted(alt, cuts, side=side) / alt.size
        # reject above: type1 = 1 - f0, type2 = f1; reject below is the complement
        err = 1.0 - f0 + f1
        for above, e in ((True, err), (False, 2.0 - err)):
            i = int(np.argmin(e))
            if best is None or e[i] < best.total_error:
                t1 = 1.0 - f0[i] if above else f0[i]
                t2 = f1[i] if above else 1.0 - f1[i]
                # "left" counts ties as above the cut, "right" as below
                strict = (side == "right") if above else (side == "left")
                best = ThresholdRule(float(cuts[i]), above, strict, float(t1), float(t2))
    return best


@dataclass(frozen=True)
class WitnessReport:
    n: int
    epsilon: float
    delta: float
    m: float
    trials: int
    rule: ThresholdRule
    h2_per_coordinate: float
    composed_h2: float
    tv_bound: float

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "m": self.m,
            "trials": self.trials,
            "best_total_error": self.rule.total_error,
            "best_threshold": self.rule.threshold,
            "reject_above": self.rule.reject_above,
            "h2_per_coordinate": self.h2_per_coordinate,
            "composed_h2": self.composed_h2,
            "tv_bound": self.tv_bound,
        }


def indistinguishability_witness(
    n: int, epsilon: float, delta: float, m: float, trials: int, seed: int
) -> WitnessReport:
    """Best empirical-TV threshold rule for Poissonized ``U_n`` against random
    admissible instances, next to the Hellinger certificate at rate ``m/n``.
    """
    lam = m / n

    def null_block(b: int, size: int) -> np.ndarray:
        counts = substream(seed, 0, b).poisson(lam, size=(size, n))
        return kernels.batch_statistic(counts, kernels.EMPIRICAL_TV)

    def alt_block(b: int, size: int) -> np.ndarray:
        counts = sample_lb_block(n, epsilon, m, size, substream(seed, 1, b))
        return kernels.batch_statistic(counts, kernels.EMPIRICAL_TV)

    null = map_blocks(null_block, trials)
    alt = map_blocks(alt_block, trials)
    h2 = hellinger2_poisson_mixture(lam, epsilon)
    composed = composed_hellinger2(np.full(n, h2))
    return WitnessReport(
        n, epsilon, delta, m, trials, best_threshold_rule(null, alt), h2, composed, tv_upper_from_hellinger(composed)
    )
