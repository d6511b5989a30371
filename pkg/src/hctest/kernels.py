"""Backend selection for the numeric inner loops.

The compiled extension is used when it imports; otherwise, or when the
``HCTEST_PURE_PYTHON`` environment variable is set to a non-empty value, the
numpy implementation is used. ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

if os.environ.get("HCTEST_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

#: Statistic codes understood by ``batch_statistic``.
EMPIRICAL_TV, COLLISIONS, DISTINCT, CHI_SQUARED = range(4)

tail_excess = _impl.tail_excess
hessian_integer = _impl.hessian_integer
batch_statistic = _impl.batch_statistic
poisson_mixture_h2 = _impl.poisson_mixture_h2

__all__ = [
    "BACKEND",
    "EMPIRICAL_TV",
    "COLLISIONS",
    "DISTINCT",
    "CHI_SQUARED",
    "tail_excess",
    "hessian_integer",
    "batch_statistic",
    "poisson_mixture_h2",
]
