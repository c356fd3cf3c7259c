"""Kernel dispatch.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. Setting ``CLUSTERLAB_PURE_PYTHON=1`` forces the
fallback (useful for the benchmark and for equivalence tests).
"""

import os

from clusterlab import _kernels_py

try:
    if os.environ.get("CLUSTERLAB_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from clusterlab import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

block_stats = _impl.block_stats
block_maxima = _impl.block_maxima
ar1_filter = _impl.ar1_filter
moving_max = _impl.moving_max

fallback = _kernels_py

__all__ = ["BACKEND", "block_stats", "block_maxima", "ar1_filter", "moving_max", "fallback"]
