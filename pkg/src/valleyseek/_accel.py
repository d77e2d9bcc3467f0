"""Backend switch for the hot training kernels.

Numba is used when importable unless ``VALLEYSEEK_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorised numpy kernels run instead.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("VALLEYSEEK_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG in ("1", "true", "yes", "on")

USE_NUMBA = numba is not None and not DISABLED_BY_ENV
BACKEND = "numba" if USE_NUMBA else "numpy"

CACHE = True
FASTMATH = False  # fastmath reorders reductions; keep results reproducible


def njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=CACHE, fastmath=FASTMATH, nogil=True)(fn)
