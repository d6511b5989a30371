"""Empirical calibration of the tester's two constants.

For a candidate ``sample_constant`` every grid cell gets ``m`` from the
sample-size formula, and ``constant_C`` is set to the smallest ratio, over the
cells, of the exact worst-case expectation gap to the regime formula. The
search keeps the smallest ``sample_constant`` on a geometric ladder for which
each cell's type-I and worst-case type-II Clopper-Pearson upper bounds are at
most ``delta``, then multiplies it by a safety margin.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .core import HCTestError, uniform
from .exact import mu_exact, mu_uniform, regime_formula
from .majorization import worst_case_family
from .montecarlo import CI_ALPHA, clopper_pearson_upper, simulate_statistic

#: Cells (n, epsilon, delta) used for the packaged constants.
DEFAULT_GRID: tuple[tuple[int, float, float], ...] = (
    (50, 0.4, 0.1),
    (50, 0.3, 0.05),
    (100, 0.3, 0.05),
    (100, 0.5, 0.05),
    (200, 0.25, 0.05),
)
DEFAULT_TRIALS = 2000
DEFAULT_SEED = 7_000_001
DEFAULT_MARGIN = 1.25
#: Ratio between neighbouring candidates in the search.
STEP = 2.0 ** (1.0 / 16.0)
MAX_CONSTANT = 1024.0


class CalibrationInfeasible(HCTestError):
    pass


@dataclass(frozen=True)
class CellResult:
    n: int
    epsilon: float
    delta: float
    m: int
    threshold: float
    type1: float
    type1_ci: float
    type2_worst: float
    type2_ci: float
    argmax_k: int

    @property
    def passed(self) -> bool:
        return max(self.type1_ci, self.type2_ci) <= self.delta


@dataclass(frozen=True)
class CalibrationResult:
    constant_C: float
    sample_constant: float
    grid: tuple[tuple[int, float, float], ...]
    achieved_errors: tuple[CellResult, ...]
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    margin: float = DEFAULT_MARGIN
    search_constant: float = float("nan")
    confidence: float = 1.0 - CI_ALPHA
    notes: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "constant_C": self.constant_C,
            "sample_constant": self.sample_constant,
            "search_constant": self.search_constant,
            "margin": self.margin,
            "trials": self.trials,
            "seed": self.seed,
            "confidence": self.confidence,
            "grid": [list(c) for c in self.grid],
            "achieved_errors": [asdict(c) for c in self.achieved_errors],
            "notes": list(self.notes),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CalibrationResult":
        return cls(
            constant_C=float(obj["constant_C"]),
            sample_constant=float(obj["sample_constant"]),
            grid=tuple((int(n), float(e), float(d)) for n, e, d in obj["grid"]),
            achieved_errors=tuple(CellResult(**c) for c in obj.get("achieved_errors", [])),
            trials=int(obj.get("trials", DEFAULT_TRIALS)),
            seed=int(obj.get("seed", DEFAULT_SEED)),
            margin=float(obj.get("margin", DEFAULT_MARGIN)),
            search_constant=float(obj.get("search_constant", float("nan"))),
            confidence=float(obj.get("confidence", 1.0 - CI_ALPHA)),
            notes=tuple(obj.get("notes", ())),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def default_path() -> Path:
    """``$HCTEST_CALIBRATION`` if set, else the file shipped with the package."""
    override = os.environ.get("HCTEST_CALIBRATION")
    if override:
        return Path(override)
    return packaged_path()


def packaged_path() -> Path:
    return Path(str(resources.files("hctest") / "data" / "calibration.json"))


@lru_cache(maxsize=8)
def _load(path: str) -> CalibrationResult:
    return CalibrationResult.from_json(json.loads(Path(path).read_text()))


def load_calibration(path=None) -> CalibrationResult:
    """Read a saved calibration (the packaged one by default)."""
    p = Path(path) if path is not None else default_path()
    if not p.exists():
        raise FileNotFoundError(f"no calibration file at {p}; run `hctest calibrate`")
    return _load(str(p.resolve()))


def _sample_size(n, epsilon, delta, sample_constant) -> int:
    # same rule as testers.required_samples, without building a config
    log_inv = math.log(1.0 / delta)
    raw = sample_constant * (math.sqrt(n * log_inv) + log_inv) / epsilon**2
    return max(6, math.ceil(raw * (1.0 - 1e-12)))


@lru_cache(maxsize=4096)
def worst_gap_ratio(n: int, m: int, epsilon: float) -> tuple[float, int]:
    """Smallest exact ``(mu(p) - mu(U_n)) / formula`` over the family, and its ``k``."""
    mu_u = mu_uniform(n, m)
    _, shape = regime_formula(n, m, epsilon)
    best, arg = math.inf, 0
    for mem in worst_case_family(n, epsilon).members:
        ratio = (mu_exact(mem.dist, m) - mu_u) / shape
        if ratio < best:
            best, arg = ratio, mem.heavy
    return best, arg


def constant_for(grid: Sequence[tuple[int, float, float]], sample_constant: float) -> float:
    return min(
        worst_gap_ratio(n, _sample_size(n, e, d, sample_constant), e)[0] for n, e, d in grid
    )


def evaluate_cell(
    cell_index: int,
    cell: tuple[int, float, float],
    constant_C: float,
    sample_constant: float,
    trials: int,
    seed: int,
) -> CellResult:
    from .testers import StatisticKind

    n, epsilon, delta = cell
    m = _sample_size(n, epsilon, delta, sample_constant)
    _, shape = regime_formula(n, m, epsilon)
    thr = mu_uniform(n, m) + 0.5 * constant_C * shape
    code = StatisticKind.EMPIRICAL_TV.code

    null = simulate_statistic(code, uniform(n), m, trials, seed, key=(cell_index, 0))
    rejections = int((null >= thr).sum())
    type1_ci = clopper_pearson_upper(rejections, trials, CI_ALPHA)

    rows = []  # (rate, ci_upper, k)
    for idx, mem in enumerate(worst_case_family(n, epsilon).members):
        alt = simulate_statistic(code, mem.dist, m, trials, seed, key=(cell_index, 1, idx))
        accepts = int((alt < thr).sum())
        rows.append((accepts / trials, clopper_pearson_upper(accepts, trials, CI_ALPHA), mem.heavy))
        if rows[-1][1] > delta:
            break  # this candidate already fails
    worst, _, worst_k = max(rows)
    worst_ci = max(r[1] for r in rows)
    return CellResult(n, epsilon, delta, m, thr, rejections / trials, type1_ci, worst, worst_ci, worst_k)


def _feasible(grid, sample_constant, trials, seed) -> tuple[bool, CellResult | None]:
    c = constant_for(grid, sample_constant)
    if not c > 0:
        return False, None
    for i, cell in enumerate(grid):
        res = evaluate_cell(i, cell, c, sample_constant, trials, seed)
        if not res.passed:
            return False, res
    return True, None


def calibrate(
    grid: Sequence[tuple[int, float, float]] = DEFAULT_GRID,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    margin: float = DEFAULT_MARGIN,
    log=None,
) -> CalibrationResult:
    """Search the smallest feasible ``sample_constant`` on the ladder ``STEP**j``."""
    grid = tuple((int(n), float(e), float(d)) for n, e, d in grid)
    if not grid:
        raise HCTestError("empty calibration grid")
    say = log or (lambda msg: None)

    def check(j: int):
        ok, fail = _feasible(grid, STEP**j, trials, seed)
        say(f"sample_constant={STEP ** j:.4f}: {'ok' if ok else 'fail'}")
        return ok, fail

    # bracket by whole octaves, then bisect the ladder exponents in between
    per_octave = round(math.log(2.0) / math.log(STEP))
    floor_j = -8 * per_octave
    ok, fail = check(0)
    if ok:
        hi = 0
        lo = -per_octave
        while lo > floor_j and check(lo)[0]:
            hi, lo = lo, lo - per_octave
    else:
        lo, hi = 0, per_octave
        while True:
            ok, fail = check(hi)
            if ok:
                break
            if STEP**hi >= MAX_CONSTANT:
                where = (
                    f"cell n={fail.n} eps={fail.epsilon} delta={fail.delta}"
                    if fail
                    else "gap constant is not positive"
                )
                raise CalibrationInfeasible(
                    f"no sample_constant up to {MAX_CONSTANT} works; failing {where}"
                )
            lo, hi = hi, hi + per_octave
    # hi is feasible, lo is not (or sits at the floor)
    while hi - lo > 1:
        mid = (hi + lo) // 2
        if check(mid)[0]:
            hi = mid
        else:
            lo = mid
    found = STEP**hi
    final = found * margin
    c = constant_for(grid, final)
    cells = tuple(evaluate_cell(i, cell, c, final, trials, seed + 1) for i, cell in enumerate(grid))
    notes = []
    bad = [r for r in cells if not r.passed]
    if bad:
        notes.append(f"{len(bad)} cell(s) exceed delta after applying the margin")
    return CalibrationResult(
        constant_C=c,
        sample_constant=final,
        grid=grid,
        achieved_errors=cells,
        trials=trials,
        seed=seed,
        margin=margin,
        search_constant=found,
        notes=tuple(notes),
    )
