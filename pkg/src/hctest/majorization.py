"""Majorization, averaging, and worst-case error estimation for convex
symmetric histogram statistics.

If ``p`` majorizes ``q`` then any convex symmetric statistic of the histogram
under ``p`` stochastically dominates the one under ``q``. Averaging the heavy
and the light coordinates of any ``p`` at distance ``eps`` from uniform gives
a two-valued distribution that ``p`` majorizes, so the largest type-II error
over the finite family built by :func:`worst_case_family` bounds the type-II
error over every distribution at distance at least ``eps``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import DiscreteDistribution, DomainMismatch, HCTestError, Kind, validate
from .montecarlo import CI_ALPHA, clopper_pearson_upper, simulate_statistic
from .testers import StatisticKind

TOL = 1e-12


class EmptySubset(HCTestError):
    pass


class NoFeasibleMember(HCTestError):
    pass


class NotMajorized(UserWarning):
    pass


class Side(str, enum.Enum):
    ABOVE = "ABOVE"  # statistic >= threshold
    BELOW = "BELOW"  # statistic < threshold


def majorizes(p: DiscreteDistribution, q: DiscreteDistribution, tol: float = TOL) -> bool:
    """True when every prefix sum of sorted-descending ``p`` is at least ``q``'s."""
    if p.n != q.n:
        raise DomainMismatch(f"domain sizes differ: {p.n} vs {q.n}")
    ps = np.cumsum(np.sort(p.weights)[::-1])
    qs = np.cumsum(np.sort(q.weights)[::-1])
    return bool(np.all(ps >= qs - tol))


def average_on_subset(p: DiscreteDistribution, subset: Iterable[int]) -> DiscreteDistribution:
    idx = np.unique(np.fromiter(subset, dtype=np.int64))
    if idx.size == 0:
        raise EmptySubset("subset must be nonempty")
    if idx.min() < 0 or idx.max() >= p.n:
        raise DomainMismatch("subset index outside the domain")
    w = p.weights.copy()
    w[idx] = w[idx].sum() / idx.size
    return DiscreteDistribution(_ro(w), p.kind)


def two_level_average(p: DiscreteDistribution) -> DiscreteDistribution:
    """Average the floor(n/2) heaviest and the floor(n/2) lightest masses separately.

    For odd ``n`` the median element is left alone.
    """
    if p.n < 2:
        raise HCTestError("need n >= 2")
    order = np.argsort(-p.weights, kind="stable")
    half = p.n // 2
    q = average_on_subset(p, order[:half])
    return average_on_subset(q, order[p.n - half :])


def _ro(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FamilyMember:
    heavy: int  # number of heavy coordinates
    middle: bool  # whether one coordinate sits exactly at 1/n
    dist: DiscreteDistribution

    def describe(self) -> str:
        n = self.dist.n
        w = self.dist.weights
        parts = [f"{self.heavy}x{w[0]:.6g}"]
        if self.middle:
            parts.append(f"1x{1.0 / n:.6g}")
        light = n - self.heavy - int(self.middle)
        parts.append(f"{light}x{w[-1]:.6g}")
        return " + ".join(parts)


@dataclass(frozen=True)
class CandidateFamily:
    n: int
    epsilon: float
    members: tuple[FamilyMember, ...]

    @property
    def feasible_k(self) -> list[int]:
        return [mem.heavy for mem in self.members if not mem.middle]

    def __len__(self) -> int:
        return len(self.members)


def family_member(n: int, epsilon: float, k: int, middle: bool = False) -> DiscreteDistribution:
    """``k`` masses ``1/n + eps/k``, optionally one at ``1/n``, the rest light."""
    light_count = n - k - int(middle)
    if k < 1 or light_count < 1:
        raise HCTestError("need at least one heavy and one light coordinate")
    heavy = 1.0 / n + epsilon / k
    light = 1.0 / n - epsilon / light_count
    if light < 0:
        if light > -1e-15:
            light = 0.0
        else:
            raise NoFeasibleMember(f"k={k}: light mass {light} is negative")
    w = np.empty(n)
    w[:k] = heavy
    if middle:
        w[k] = 1.0 / n
    w[n - light_count :] = light
    return DiscreteDistribution(_ro(w), Kind.TRUE)


def worst_case_family(n: int, epsilon: float, middle_variants: bool | None = None) -> CandidateFamily:
    """Two-valued distributions at distance exactly ``epsilon`` from uniform.

    ``middle_variants`` (default: on for odd ``n``) adds the three-valued
    variants that keep one coordinate at ``1/n``.
    """
    if n < 2:
        raise HCTestError("need n >= 2")
    if not 0 < epsilon < 1:
        raise HCTestError("epsilon must lie in (0, 1)")
    if middle_variants is None:
        middle_variants = n % 2 == 1
    members = []
    for k in range(1, n):
        try:
            members.append(FamilyMember(k, False, family_member(n, epsilon, k)))
        except NoFeasibleMember:
            continue
    if middle_variants:
        for k in range(1, n - 1):
            try:
                members.append(FamilyMember(k, True, family_member(n, epsilon, k, middle=True)))
            except NoFeasibleMember:
                continue
    if not members:
        raise NoFeasibleMember(
            f"no feasible heavy-set size for n={n}, epsilon={epsilon}; "
            f"need epsilon <= 1 - k/n for some k >= 1"
        )
    return CandidateFamily(n, epsilon, tuple(members))


# -- Monte Carlo --------------------------------------------------------------


@dataclass(frozen=True)
class DominanceReport:
    trials: int
    max_cdf_violation: float
    standard_error: float
    hypothesis_holds: bool
    passed: bool

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "max_cdf_violation": self.max_cdf_violation,
            "standard_error": self.standard_error,
            "majorized": self.hypothesis_holds,
            "pass": self.passed,
        }


def cdf_violation(dominating: np.ndarray, dominated: np.ndarray) -> float:
    """Largest ``F_dominating(x) - F_dominated(x)`` over all observed ``x``."""
    a = np.sort(dominating)
    b = np.sort(dominated)
    grid = np.union1d(a, b)
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(max(0.0, np.max(fa - fb)))


def dominance_check(
    p: DiscreteDistribution,
    q: DiscreteDistribution,
    statistic: StatisticKind,
    m: int,
    trials: int,
    seed: int,
) -> DominanceReport:
    """Empirically check that the statistic under ``p`` dominates it under ``q``.

    The standard error is the largest possible one for the difference of two
    independent empirical CDFs, ``sqrt(1 / (2 trials))``.
    """
    import warnings

    holds = majorizes(p, q)
    if not holds:
        warnings.warn("p does not majorize q; domination is not implied", NotMajorized, stacklevel=2)
    sp = simulate_statistic(statistic.code, p, m, trials, seed, key=(1,))
    sq = simulate_statistic(statistic.code, q, m, trials, seed, key=(2,))
    violation = cdf_violation(sp, sq)
    se = math.sqrt(0.5 / trials)
    return DominanceReport(trials, violation, se, holds, violation <= 3.0 * se)


@dataclass(frozen=True)
class ErrorEstimate:
    rate: float
    ci_upper: float
    events: int
    trials: int


def _count_side(values: np.ndarray, threshold: float, side: Side) -> int:
    if side is Side.ABOVE:
        return int(np.count_nonzero(values >= threshold))
    return int(np.count_nonzero(values < threshold))


def empirical_error_estimate(
    statistic: StatisticKind,
    dist: DiscreteDistribution,
    m: int,
    threshold: float,
    side: Side | str,
    trials: int,
    seed: int,
    key: Sequence[int] = (),
) -> ErrorEstimate:
    """Monte Carlo estimate of ``Pr[statistic >= threshold]`` (ABOVE) or
    ``Pr[statistic < threshold]`` (BELOW), with a one-sided Clopper-Pearson
    upper bound at confidence ``1 - 1e-3``.
    """
    if trials < 100:
        raise HCTestError("use at least 100 trials")
    side = Side(side)
    values = simulate_statistic(statistic.code, dist, m, trials, seed, key=key)
    events = _count_side(values, threshold, side)
    return ErrorEstimate(events / trials, clopper_pearson_upper(events, trials, CI_ALPHA), events, trials)


@dataclass(frozen=True)
class MemberResult:
    heavy: int
    middle: bool
    rate: float
    ci_upper: float
    description: str


@dataclass(frozen=True)
class WorstCaseReport:
    statistic: StatisticKind
    n: int
    m: int
    epsilon: float
    threshold: float
    trials_per_member: int
    rows: tuple[MemberResult, ...]
    guaranteed_radius: float
    worst_rate: float
    argmax_k: int
    argmax_middle: bool
    ci_upper: float  # largest member upper bound

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic.value,
            "n": self.n,
            "m": self.m,
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "trials_per_member": self.trials_per_member,
            "members": len(self.rows),
            "worst_rate": self.worst_rate,
            "argmax_k": self.argmax_k,
            "argmax_middle": self.argmax_middle,
            "ci_upper": self.ci_upper,
            "guaranteed_radius": self.guaranteed_radius,
            "three_valued_radius": 2.0 * self.epsilon,
        }

    def csv_rows(self) -> list[dict]:
        return [
            {
                "k": r.heavy,
                "middle": int(r.middle),
                "rate": r.rate,
                "ci_upper": r.ci_upper,
                "member": r.description,
            }
            for r in self.rows
        ]


def worst_case_type2(
    statistic: StatisticKind,
    n: int,
    m: int,
    epsilon: float,
    threshold: float,
    trials: int,
    seed: int,
    family: CandidateFamily | None = None,
    key: Sequence[int] = (),
) -> WorstCaseReport:
    """Largest acceptance rate ``Pr[statistic < threshold]`` over the family.

    ``trials`` histograms are drawn for every member. For a convex symmetric
    statistic the result bounds (up to Monte Carlo error) the type-II error at
    every distribution ``eps``-far from uniform, so ``guaranteed_radius`` is
    ``epsilon``; the three-valued middle variants alone would only certify
    radius ``2 * epsilon``.
    """
    if not statistic.convex:
        import warnings

        warnings.warn(
            f"{statistic.value} is not convex; the family does not bound all distributions",
            stacklevel=2,
        )
    if family is None:
        family = worst_case_family(n, epsilon)
    rows = []
    for idx, mem in enumerate(family.members):
        values = simulate_statistic(statistic.code, mem.dist, m, trials, seed, key=(*key, idx))
        events = _count_side(values, threshold, Side.BELOW)
        rows.append(
            MemberResult(
                mem.heavy,
                mem.middle,
                events / trials,
                clopper_pearson_upper(events, trials, CI_ALPHA),
                mem.describe(),
            )
        )
    worst = max(range(len(rows)), key=lambda i: (rows[i].rate, rows[i].ci_upper))
    return WorstCaseReport(
        statistic=statistic,
        n=n,
        m=m,
        epsilon=epsilon,
        threshold=threshold,
        trials_per_member=trials,
        rows=tuple(rows),
        guaranteed_radius=epsilon,
        worst_rate=rows[worst].rate,
        argmax_k=rows[worst].heavy,
        argmax_middle=rows[worst].middle,
        ci_upper=max(r.ci_upper for r in rows),
    )


def random_majorized_pair(n: int, rng: np.random.Generator, mixing: float | None = None):
    """A random ``p`` and ``q = A p`` with ``A`` a random doubly stochastic matrix.

    ``A`` is a convex combination of the identity (weight ``mixing``) and a
    few random permutation matrices, so ``p`` majorizes ``q``.
    """
    p = rng.dirichlet(np.full(n, 0.5))
    if mixing is None:
        mixing = rng.uniform(0.0, 0.5)
    perms = [rng.permutation(n) for _ in range(3)]
    lam = rng.dirichlet(np.ones(len(perms))) * (1.0 - mixing)
    q = mixing * p
    for w, perm in zip(lam, perms):
        q = q + w * p[perm]
    return validate(p), validate(q)
