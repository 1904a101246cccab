"""Numba switch.

Set ``CURVGUIDE_NO_NUMBA=1`` before import to run every kernel through its
pure-numpy/Python path. Handy for debugging and for checking that both paths
agree.
"""
import os

_flag = os.environ.get("CURVGUIDE_NO_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _flag not in ("1", "true", "yes")


def njit(func):
    """``numba.njit`` with cache/nogil when numba is enabled, identity otherwise."""
    if USE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def thread_count():
    """Worker threads for embarrassingly parallel sweeps (``CURVGUIDE_THREADS``)."""
    value = os.environ.get("CURVGUIDE_THREADS")
    if value:
        return max(1, int(value))
    return os.cpu_count() or 1
