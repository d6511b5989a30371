"""Distributions, histograms, distances and seeded sampling."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

#: Tolerance for treating a weight vector as already normalized.
NORMALIZE_TOL = 1e-6
#: Tolerance for the sum of a stored true distribution.
SUM_TOL = 1e-9
#: Default pseudo-distribution mass bounds: sum must lie in [1/C1, C2].
DEFAULT_C1 = 2.0
DEFAULT_C2 = 2.0
#: Trials per RNG substream. Fixed so results do not depend on worker count.
BLOCK_SIZE = 1024


class HCTestError(ValueError):
    """Base class for parameter and input errors raised by this package."""


class NegativeWeight(HCTestError):
    pass


class SumOutOfRange(HCTestError):
    pass


class NotNormalizable(HCTestError):
    pass


class DomainMismatch(HCTestError):
    pass


class PseudoDistributionInput(HCTestError):
    pass


class Kind(str, enum.Enum):
    TRUE = "true-distribution"
    PSEUDO = "pseudo-distribution"


class SamplingMode(str, enum.Enum):
    MULTINOMIAL = "multinomial"
    POISSONIZED = "poissonized"


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Nonnegative weights over ``range(n)``.

    Build instances with :func:`validate` or :func:`uniform`; the constructor
    does not check invariants.
    """

    weights: np.ndarray
    kind: Kind = Kind.TRUE

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.weights, other.weights)

    def __hash__(self) -> int:
        return hash((self.kind, self.weights.tobytes()))

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "weights": [float(w) for w in self.weights]}

    @classmethod
    def from_json(cls, obj: dict | list) -> "DiscreteDistribution":
        if isinstance(obj, list):
            return validate(obj)
        kind = Kind(obj.get("kind", Kind.TRUE.value))
        return validate(obj["weights"], kind)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Counts of how often each domain element was sampled.

    ``m`` is the sample size for multinomial sampling and the nominal rate for
    Poissonized sampling, in which case ``counts.sum()`` is random.
    """

    counts: np.ndarray
    m: int
    mode: SamplingMode = SamplingMode.MULTINOMIAL

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1:
            raise HCTestError("histogram counts must be one-dimensional")
        if np.any(counts < 0):
            raise HCTestError("histogram counts must be nonnegative")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.floor(counts)):
                raise HCTestError("histogram counts must be integers")
        counts = _frozen(counts.astype(np.int64))
        object.__setattr__(self, "counts", counts)
        if self.mode is SamplingMode.MULTINOMIAL and int(counts.sum()) != self.m:
            raise HCTestError(
                f"multinomial histogram sums to {int(counts.sum())}, expected m={self.m}"
            )

    @property
    def n(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            self.m == other.m
            and self.mode == other.mode
            and np.array_equal(self.counts, other.counts)
        )

    def to_json(self) -> dict:
        return {"counts": [int(c) for c in self.counts], "m": self.m, "mode": self.mode.value}

    @classmethod
    def from_json(cls, obj: dict) -> "Histogram":
        counts = obj["counts"]
        mode = SamplingMode(obj.get("mode", SamplingMode.MULTINOMIAL.value))
        m = int(obj.get("m", sum(counts)))
        return cls(np.asarray(counts, dtype=np.int64), m, mode)

    @classmethod
    def from_samples(cls, samples: Sequence[int], n: int) -> "Histogram":
        """Histogram of raw samples given as 0-based element indices."""
        samples = np.asarray(samples, dtype=np.int64)
        if samples.size and (samples.min() < 0 or samples.max() >= n):
            raise DomainMismatch(f"sample outside domain [0, {n})")
        return cls(np.bincount(samples, minlength=n), int(samples.size))


def validate(
    weights: Sequence[float] | np.ndarray,
    kind: Kind | str = Kind.TRUE,
    c1: float = DEFAULT_C1,
    c2: float = DEFAULT_C2,
) -> DiscreteDistribution:
    """Check a weight vector and wrap it as a :class:`DiscreteDistribution`.

    True distributions within ``NORMALIZE_TOL`` of total mass 1 are
    renormalized; pseudo-distributions must have total mass in ``[1/c1, c2]``.
    """
    kind = Kind(kind)
    w = np.array(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise HCTestError("weights must be a nonempty vector")
    if not np.all(np.isfinite(w)):
        raise HCTestError("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight at index {int(np.argmin(w))}")
    total = float(w.sum())
    if kind is Kind.TRUE:
        if abs(total - 1.0) > NORMALIZE_TOL:
            raise NotNormalizable(f"weights sum to {total}, not within {NORMALIZE_TOL} of 1")
        if total != 1.0:
            w = w / total
    else:
        if not (1.0 / c1 <= total <= c2):
            raise SumOutOfRange(f"pseudo-distribution mass {total} outside [{1 / c1}, {c2}]")
    return DiscreteDistribution(_frozen(w), kind)


def uniform(n: int) -> DiscreteDistribution:
    if n < 1:
        raise HCTestError("n must be positive")
    return DiscreteDistribution(_frozen(np.full(n, 1.0 / n)), Kind.TRUE)


def _check_domains(p: DiscreteDistribution, q: DiscreteDistribution) -> None:
    if p.n != q.n:
        raise DomainMismatch(f"domain sizes differ: {p.n} vs {q.n}")


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    _check_domains(p, q)
    return 0.5 * float(np.abs(p.weights - q.weights).sum())


def hellinger_squared(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    _check_domains(p, q)
    d = np.sqrt(p.weights) - np.sqrt(q.weights)
    return 0.5 * float(np.dot(d, d))


def hellinger_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    return math.sqrt(hellinger_squared(p, q))


# -- randomness -------------------------------------------------------------


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the substream identified by ``(seed, key)``.

    The key is hashed together with the seed by ``SeedSequence``, so any two
    distinct keys give independent streams regardless of evaluation order.
    """
    ss = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def iter_blocks(trials: int, block_size: int = BLOCK_SIZE) -> Iterator[tuple[int, int]]:
    """Yield ``(block_index, size)`` covering ``trials`` trials."""
    for b, start in enumerate(range(0, trials, block_size)):
        yield b, min(block_size, trials - start)


def _require_true(p: DiscreteDistribution) -> None:
    if p.kind is not Kind.TRUE:
        raise PseudoDistributionInput("multinomial sampling needs a true distribution")


def sample_multinomial(p: DiscreteDistribution, m: int, seed: int) -> Histogram:
    """Histogram of ``m`` i.i.d. draws from ``p``; a pure function of its inputs."""
    _require_true(p)
    if m < 1:
        raise HCTestError("m must be at least 1")
    counts = substream(seed).multinomial(m, p.weights)
    return Histogram(counts, m, SamplingMode.MULTINOMIAL)


def sample_poissonized(w: DiscreteDistribution, m: int, seed: int) -> Histogram:
    """Independent ``Poisson(m * w_i)`` counts per coordinate."""
    if m < 1:
        raise HCTestError("m must be at least 1")
    counts = substream(seed).poisson(m * w.weights)
    return Histogram(counts, m, SamplingMode.POISSONIZED)


def sample_block(
    dist: DiscreteDistribution,
    m: int,
    size: int,
    rng: np.random.Generator,
    mode: SamplingMode = SamplingMode.MULTINOMIAL,
) -> np.ndarray:
    """A ``(size, n)`` int64 count matrix of independent histograms."""
    if mode is SamplingMode.MULTINOMIAL:
        _require_true(dist)
        return rng.multinomial(m, dist.weights, size=size)
    return rng.poisson(m * dist.weights, size=(size, dist.n))


def load_json(path) -> object:
    with open(path) as fh:
        return json.load(fh)
