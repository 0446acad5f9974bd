"""JIT switch for the hot kernels.

Kernels are written in the numba subset of Python. When numba is missing, or
``SGSEVO_DISABLE_NUMBA`` is set to a truthy value, ``njit`` is a no-op and the
same functions run under CPython; the evaluator additionally switches to a
vectorised numpy implementation.
"""

import os

_FLAG = os.environ.get("SGSEVO_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit(cache=True, nogil=True)`` or an identity decorator."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
