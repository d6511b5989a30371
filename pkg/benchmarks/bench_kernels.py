"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the best-of-N wall time of each backend and
the speedup. Both backends are imported directly, so the environment switch
``HCTEST_PURE_PYTHON`` has no effect here.
"""

import argparse
import timeit

import numpy as np

from hctest import _kernels_py

try:
    from hctest import _kernels
except ImportError:  # extension not built
    _kernels = None


def cases():
    rng = np.random.default_rng(0)
    tv_counts = rng.multinomial(282, np.full(100, 0.01), size=4096)
    small_counts = rng.multinomial(40, np.full(200, 0.005), size=4096)
    return {
        "tail_excess m=10^5": lambda k: k.tail_excess(100_000, 1e-3, 100.0),
        "tail_excess x 1000, m=300": lambda k: [k.tail_excess(300, 0.01 + i * 1e-5, 3.0) for i in range(1000)],
        "hessian_integer x 1000": lambda k: [k.hessian_integer(400, 1 + i % 300, 0.3) for i in range(1000)],
        "batch_statistic TV 4096x100": lambda k: k.batch_statistic(tv_counts, 0),
        "batch_statistic TV 4096x200 (m<n)": lambda k: k.batch_statistic(small_counts, 0),
        "batch_statistic chi2 4096x100": lambda k: k.batch_statistic(tv_counts, 3),
        "poisson_mixture_h2 lam=50": lambda k: k.poisson_mixture_h2(50.0, 0.25, 800),
    }


def best(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05 and number < 10**5:
        number *= 4
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    print(f"{'kernel':38s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, call in cases().items():
        py = best(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:38s} {py * 1e6:10.1f}us {'n/a':>12s} {'':>8s}")
            continue
        cy = best(lambda: call(_kernels), args.repeat)
        print(f"{name:38s} {py * 1e6:10.1f}us {cy * 1e6:10.1f}us {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
