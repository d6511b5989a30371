"""The empirical-TV uniformity tester, baseline statistics, and the
identity-to-uniformity reduction.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .core import (
    DiscreteDistribution,
    DomainMismatch,
    HCTestError,
    Histogram,
    Kind,
    substream,
)
from .exact import Regime, mu_uniform, regime, threshold


class TooFewSamples(HCTestError):
    pass


class InsufficientSamples(UserWarning):
    """The sample is smaller than the size the tester's guarantee needs."""


class StatisticKind(str, enum.Enum):
    EMPIRICAL_TV = "empirical_tv"
    COLLISIONS = "collisions"
    DISTINCT = "distinct"
    CHI_SQUARED = "chi_squared"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def convex(self) -> bool:
        """Whether the statistic is convex in the histogram (distinct is not)."""
        return self is not StatisticKind.DISTINCT

    def evaluate(self, counts) -> np.ndarray | float:
        """Evaluate on a Histogram, a count vector, or a (trials, n) matrix.

        Float input is evaluated as the real relaxation.
        """
        if isinstance(counts, Histogram):
            counts = counts.counts
        a = np.asarray(counts)
        if not np.issubdtype(a.dtype, np.integer):
            a = a.astype(np.float64)
        else:
            a = a.astype(np.int64, copy=False)
        out = kernels.batch_statistic(np.ascontiguousarray(np.atleast_2d(a)), self.code)
        return float(out[0]) if a.ndim == 1 else out

    @classmethod
    def parse(cls, name: str) -> "StatisticKind":
        aliases = {"tv": cls.EMPIRICAL_TV, "chi2": cls.CHI_SQUARED}
        key = name.strip().lower().replace("-", "_")
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            return cls[name.strip().upper().replace("-", "_")]


_CODES = {
    StatisticKind.EMPIRICAL_TV: kernels.EMPIRICAL_TV,
    StatisticKind.COLLISIONS: kernels.COLLISIONS,
    StatisticKind.DISTINCT: kernels.DISTINCT,
    StatisticKind.CHI_SQUARED: kernels.CHI_SQUARED,
}


def statistic_collisions(hist: Histogram) -> float:
    """Colliding pairs over all pairs: sum_i C(X_i, 2) / C(m, 2)."""
    if hist.total < 2:
        raise TooFewSamples("collision statistic needs at least two samples")
    return StatisticKind.COLLISIONS.evaluate(hist)


def statistic_distinct(hist: Histogram) -> float:
    """Negated number of distinct elements seen, so larger means less uniform."""
    return StatisticKind.DISTINCT.evaluate(hist)


def statistic_chi_squared(hist: Histogram, n: int | None = None) -> float:
    """sum_i ((X_i - m/n)^2 - X_i) / (m/n).

    Under ``m`` multinomial samples from uniform its mean is exactly -1.
    """
    if n is not None and n != hist.n:
        raise DomainMismatch(f"histogram has {hist.n} bins, expected {n}")
    if hist.total < 1:
        raise TooFewSamples("chi-squared statistic needs at least one sample")
    return StatisticKind.CHI_SQUARED.evaluate(hist)


# -- the tester ---------------------------------------------------------------


def _default_constants() -> tuple[float, float]:
    from .calibration import load_calibration

    cal = load_calibration()
    return cal.constant_C, cal.sample_constant


@dataclass(frozen=True)
class TesterConfig:
    """Parameters of an (epsilon, delta) uniformity tester on ``n`` elements.

    Constants left as ``None`` are read from the packaged calibration.
    """

    __test__ = False  # not a pytest class despite the name

    n: int
    epsilon: float
    delta: float
    constant_C: float | None = None
    sample_constant: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise HCTestError("n must be positive")
        if not 0 < self.epsilon < 1:
            raise HCTestError("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise HCTestError("delta must lie in (0, 1)")
        if self.constant_C is None or self.sample_constant is None:
            c, s = _default_constants()
            if self.constant_C is None:
                object.__setattr__(self, "constant_C", c)
            if self.sample_constant is None:
                object.__setattr__(self, "sample_constant", s)
        if self.constant_C <= 0 or self.sample_constant <= 0:
            raise HCTestError("constants must be positive")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "constant_C": self.constant_C,
            "sample_constant": self.sample_constant,
        }


@dataclass(frozen=True)
class Verdict:
    decision: str  # "YES" or "NO"
    statistic_value: float
    threshold: float
    regime: Regime
    n: int
    m: int
    epsilon: float
    delta: float
    seed: int | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def accepted(self) -> bool:
        return self.decision == "YES"

    def to_json(self) -> dict:
        out = {
            "decision": self.decision,
            "statistic": self.statistic_value,
            "threshold": self.threshold,
            "regime": self.regime.value,
            "n": self.n,
            "m": self.m,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
        }
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def sample_size_formula(n: int, epsilon: float, delta: float, constant: float) -> float:
    """constant * (sqrt(n log(1/delta)) + log(1/delta)) / epsilon^2, unrounded."""
    log_inv = math.log(1.0 / delta)
    return constant * (math.sqrt(n * log_inv) + log_inv) / epsilon**2


def required_samples(config: TesterConfig) -> int:
    raw = sample_size_formula(config.n, config.epsilon, config.delta, config.sample_constant)
    # absorb rounding noise before taking the ceiling
    return max(6, math.ceil(raw * (1.0 - 1e-12)))


@lru_cache(maxsize=4096)
def _mu_uniform_cached(n: int, m: int) -> float:
    return mu_uniform(n, m)


def tester_threshold(config: TesterConfig, m: int) -> float:
    return threshold(config.n, m, config.epsilon, config.constant_C, _mu_uniform_cached(config.n, m))


tester_threshold.__test__ = False


def test_uniformity(samples: Histogram, config: TesterConfig, seed: int | None = None) -> Verdict:
    """Reject uniformity when the empirical TV distance reaches the threshold."""
    if samples.n != config.n:
        raise DomainMismatch(f"histogram has {samples.n} bins, config says n={config.n}")
    m = samples.total
    if m < 1:
        raise TooFewSamples("no samples")
    notes = []
    needed = required_samples(config)
    if m < needed:
        msg = f"m={m} is below the {needed} samples the guarantee needs"
        warnings.warn(msg, InsufficientSamples, stacklevel=2)
        notes.append(msg)
    s = StatisticKind.EMPIRICAL_TV.evaluate(samples)
    t = tester_threshold(config, m)
    return Verdict(
        decision="NO" if s >= t else "YES",
        statistic_value=s,
        threshold=t,
        regime=regime(config.n, m, config.epsilon),
        n=config.n,
        m=m,
        epsilon=config.epsilon,
        delta=config.delta,
        seed=seed,
        notes=tuple(notes),
    )


test_uniformity.__test__ = False  # keep pytest from collecting it


# -- identity to uniformity -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReductionChannel:
    """Randomized map from ``[n]`` to ``[6n]`` sending ``q`` to the uniform law.

    A sample first passes through the mixture ``(p + U_n) / 2``; then element
    ``i`` lands in one of its ``dedicated_count[i]`` private buckets with
    probability ``dedicated_prob[i]`` each, or otherwise in a uniformly chosen
    bucket of the shared pool ``[shared_start, 6n)``.
    """

    source_n: int
    target_n: int
    mix: float
    dedicated_start: np.ndarray
    dedicated_count: np.ndarray
    dedicated_prob: np.ndarray
    residual: np.ndarray
    shared_start: int

    @property
    def shared_size(self) -> int:
        return self.target_n - self.shared_start

    def grain_row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sparse (indices, probabilities) row of the bucketing step for element i."""
        start, cnt = int(self.dedicated_start[i]), int(self.dedicated_count[i])
        idx = [np.arange(start, start + cnt)]
        prob = [np.full(cnt, self.dedicated_prob[i])]
        if self.residual[i] > 0 and self.shared_size > 0:
            idx.append(np.arange(self.shared_start, self.target_n))
            prob.append(np.full(self.shared_size, self.residual[i] / self.shared_size))
        return np.concatenate(idx), np.concatenate(prob)

    @property
    def rows(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [self.grain_row(i) for i in range(self.source_n)]

    def grain_pushforward(self, weights: np.ndarray) -> np.ndarray:
        out = np.zeros(self.target_n)
        out[: self.shared_start] = np.repeat(weights * self.dedicated_prob, self.dedicated_count)
        if self.shared_size > 0:
            out[self.shared_start :] = math.fsum(weights * self.residual) / self.shared_size
        return out

    def pushforward(self, p: DiscreteDistribution) -> np.ndarray:
        """Exact image of ``p`` under the channel, as a weight vector over ``[6n]``."""
        if p.n != self.source_n:
            raise DomainMismatch(f"channel expects n={self.source_n}, got {p.n}")
        mixed = (1.0 - self.mix) * p.weights + self.mix / self.source_n
        return self.grain_pushforward(mixed)

    def matrix(self) -> np.ndarray:
        """Dense row-stochastic ``(n, 6n)`` matrix of the full channel."""
        grain = np.zeros((self.source_n, self.target_n))
        for i in range(self.source_n):
            idx, prob = self.grain_row(i)
            grain[i, idx] = prob
        return (1.0 - self.mix) * grain + self.mix * grain.mean(axis=0)

    def map_samples(self, samples: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Push raw samples (0-based element indices) through the channel."""
        samples = np.asarray(samples, dtype=np.int64)
        size = samples.size
        src = np.where(rng.random(size) < self.mix, rng.integers(0, self.source_n, size), samples)
        u = rng.random(size)
        cnt = self.dedicated_count[src]
        each = self.dedicated_prob[src]
        in_dedicated = u < cnt * each
        slot = np.minimum((u / each).astype(np.int64), cnt - 1)
        out = self.dedicated_start[src] + slot
        if self.shared_size > 0:
            rest = ~in_dedicated
            frac = (u[rest] - cnt[rest] * each[rest]) / np.maximum(self.residual[src[rest]], 1e-300)
            shared = np.minimum((frac * self.shared_size).astype(np.int64), self.shared_size - 1)
            out[rest] = self.shared_start + np.maximum(shared, 0)
        return out


def build_reduction_channel(q: DiscreteDistribution) -> ReductionChannel:
    """Channel ``F`` with ``F(q)`` uniform on ``[6n]`` and
    ``|F(p) - U_6n|_1 >= (3/8) |p - q|_1``.
    """
    if q.kind is not Kind.TRUE:
        raise HCTestError("reduction needs a true distribution")
    n = q.n
    target = 6 * n
    mixed = 0.5 * q.weights + 0.5 / n
    scaled = target * mixed  # >= 3 for every element
    count = np.floor(scaled).astype(np.int64)
    start = np.concatenate([[0], np.cumsum(count)[:-1]]).astype(np.int64)
    shared_start = int(count.sum())
    if shared_start >= target:
        # every mass is a multiple of 1/(6n): no shared pool
        shared_start = target
        prob = 1.0 / count
        residual = np.zeros(n)
    else:
        prob = 1.0 / scaled
        residual = np.clip(1.0 - count / scaled, 0.0, None)
    for a in (start, count, prob, residual):
        a.setflags(write=False)
    return ReductionChannel(n, target, 0.5, start, count, prob, residual, shared_start)


def identity_config(config: TesterConfig) -> TesterConfig:
    """Uniformity-tester parameters on ``[6n]`` for identity testing on ``[n]``."""
    return TesterConfig(
        6 * config.n,
        config.epsilon / 3.0,
        config.delta,
        config.constant_C,
        config.sample_constant,
    )


def test_identity(
    samples: Histogram | np.ndarray,
    q: DiscreteDistribution,
    config: TesterConfig,
    seed: int,
    channel: ReductionChannel | None = None,
) -> Verdict:
    """Test ``p = q`` against ``d_TV(p, q) >= epsilon`` from samples of ``p``.

    ``samples`` is a histogram over ``[n]`` or an array of raw sample indices.
    """
    if config.n != q.n:
        raise DomainMismatch(f"q has {q.n} elements, config says n={config.n}")
    if isinstance(samples, Histogram):
        if samples.n != q.n:
            raise DomainMismatch("histogram and q have different domains")
        raw = np.repeat(np.arange(q.n), samples.counts)
    else:
        raw = np.asarray(samples, dtype=np.int64)
    if channel is None:
        channel = build_reduction_channel(q)
    mapped = channel.map_samples(raw, substream(seed, 0x1D))
    target_hist = Histogram.from_samples(mapped, channel.target_n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", InsufficientSamples)
        verdict = test_uniformity(target_hist, identity_config(config), seed=seed)
    needed = required_samples(identity_config(config))
    if raw.size < needed:
        warnings.warn(
            f"m={raw.size} is below the {needed} samples the guarantee needs",
            InsufficientSamples,
            stacklevel=2,
        )
    return verdict


test_identity.__test__ = False
