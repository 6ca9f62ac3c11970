"""Numba switch for the hot kernels.

Set ``CQED_SIM_DISABLE_NUMBA=1`` to force the pure-numpy kernels, e.g. when
numba is unavailable or when profiling the reference path.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}

DISABLED = os.environ.get("CQED_SIM_DISABLE_NUMBA", "").strip().lower() not in _FALSEY

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED

NUMBA_OPTS = {"cache": True, "nogil": True}


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched if numba is off."""
    if not HAS_NUMBA:
        return func
    return numba.njit(func, **NUMBA_OPTS)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
