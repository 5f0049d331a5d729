"""Kernel backend selection.

Set SWINFER_BACKEND=numpy to force the pure-numpy path (e.g. on hosts
where numba is unavailable or for A/B benchmarking); anything else, or
an unset variable, selects the numba kernels when numba imports cleanly.
The choice is made once at import time so every layer of a profiled
model runs on the same backend.
"""

import os

from . import kernels_numpy

_requested = os.environ.get("SWINFER_BACKEND", "numba").strip().lower()

if _requested == "numpy":
    _impl = kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        _impl = kernels_numpy
        BACKEND = "numpy"

conv2d = _impl.conv2d
maxpool2d = _impl.maxpool2d


def active_backend() -> str:
    return BACKEND
