"""Block-seeded Monte Carlo simulation of histogram statistics.

Trials are cut into fixed-size blocks; block ``b`` of stream ``key`` draws
from ``substream(seed, *key, b)``. Output therefore depends only on
``(seed, key, trials)`` and not on how many workers run the blocks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta

from . import kernels
from .core import BLOCK_SIZE, DiscreteDistribution, SamplingMode, iter_blocks, sample_block, substream

#: One-sided confidence level used for all reported Clopper-Pearson bounds.
CI_ALPHA = 1e-3


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HCTEST_THREADS", "1")))
    except ValueError:
        return 1


def map_blocks(fn: Callable[[int, int], np.ndarray], trials: int, block_size: int = BLOCK_SIZE) -> np.ndarray:
    """Concatenate ``fn(block_index, size)`` along the last axis, in block order."""
    blocks = list(iter_blocks(trials, block_size))
    workers = min(worker_count(), len(blocks))
    if workers <= 1:
        parts = [fn(b, size) for b, size in blocks]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda bs: fn(*bs), blocks))
    if not parts:
        return np.empty(0)
    return np.concatenate(parts, axis=-1)


def simulate_statistics(
    codes: Sequence[int],
    dist: DiscreteDistribution,
    m: int,
    trials: int,
    seed: int,
    key: Sequence[int] = (),
    mode: SamplingMode = SamplingMode.MULTINOMIAL,
) -> np.ndarray:
    """Sample ``trials`` histograms and evaluate several statistics on each.

    Returns an array of shape ``(len(codes), trials)``; every statistic sees
    the same histograms.
    """
    key = tuple(key)

    def run(b: int, size: int) -> np.ndarray:
        counts = sample_block(dist, m, size, substream(seed, *key, b), mode)
        return np.stack([kernels.batch_statistic(counts, c) for c in codes])

    out = map_blocks(run, trials)
    return out if out.size else np.empty((len(codes), 0))


def simulate_statistic(code, dist, m, trials, seed, key=(), mode=SamplingMode.MULTINOMIAL) -> np.ndarray:
    return simulate_statistics([code], dist, m, trials, seed, key, mode)[0]


def clopper_pearson_upper(successes: int, trials: int, alpha: float = CI_ALPHA) -> float:
    """One-sided exact binomial upper confidence bound at level ``1 - alpha``."""
    if trials <= 0:
        return 1.0
    if successes >= trials:
        return 1.0
    return float(beta.ppf(1.0 - alpha, successes + 1, trials - successes))


def clopper_pearson_lower(successes: int, trials: int, alpha: float = CI_ALPHA) -> float:
    if trials <= 0 or successes <= 0:
        return 0.0
    return float(beta.ppf(alpha, successes, trials - successes + 1))
