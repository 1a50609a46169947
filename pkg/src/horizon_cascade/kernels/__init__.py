"""Hot loops, with a numba path and a pure-numpy path.

The backend is picked once at import time from ``HORIZON_CASCADE_BACKEND``
(``numba`` by default, ``numpy`` to skip compilation). Both paths perform the
same floating-point operations in the same order, so fitted models and
predictions agree bit for bit across backends; the rolling moments agree to
rounding only.
"""

from __future__ import annotations

import logging
import os

from . import vectorized

logger = logging.getLogger(__name__)

_requested = os.environ.get("HORIZON_CASCADE_BACKEND", "numba").strip().lower()
if _requested not in {"numba", "numpy"}:
    raise ImportError(f"HORIZON_CASCADE_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from . import jit as _impl
    except ImportError:  # numba missing or broken
        logger.warning("numba unavailable, falling back to the numpy kernels")
        _impl = vectorized
else:
    _impl = vectorized

BACKEND = "numba" if _impl is not vectorized else "numpy"

rolling_moments = _impl.rolling_moments
grow_tree = _impl.grow_tree
ensemble_sum = _impl.ensemble_sum

__all__ = ["BACKEND", "rolling_moments", "grow_tree", "ensemble_sum"]
