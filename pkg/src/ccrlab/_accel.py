"""Optional numba acceleration.

Set ``CCR_LAB_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag
is read once at import time; the benchmark script toggles it in a subprocess.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("CCR_LAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by environment")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag
    _njit = None
    HAVE_NUMBA = False


def jit(func):
    """Compile ``func`` with ``numba.njit(cache=True)`` when available."""
    if HAVE_NUMBA:
        return _njit(cache=True)(func)
    return func


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
