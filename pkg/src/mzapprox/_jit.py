"""Numba switch.

Set ``MZAPPROX_DISABLE_NUMBA=1`` to run the pure-numpy kernels instead of the
jitted ones. The flag is read once, at import time.
"""
import os
import warnings

_FLAG = os.environ.get("MZAPPROX_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in {"1", "true", "yes", "on"}

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func


USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV

if DISABLED_BY_ENV is False and not HAVE_NUMBA:  # pragma: no cover
    warnings.warn("numba is not importable; using numpy kernels", RuntimeWarning)

__all__ = ["njit", "HAVE_NUMBA", "USE_NUMBA", "DISABLED_BY_ENV"]
