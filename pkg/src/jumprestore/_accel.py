"""Selects between numba-compiled kernels and the vectorised numpy fallback.

Set ``JUMPRESTORE_PURE_NUMPY=1`` (or any of ``true``/``yes``/``on``) before
import to force the numpy path. The numpy path is also used when numba is
not importable.
"""

import os

_FLAG = "JUMPRESTORE_PURE_NUMPY"


def _env_wants_numpy() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:  # pragma: no cover - exercised implicitly
    import numba  # noqa: F401

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _env_wants_numpy()
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(fn):
    """``numba.njit(cache=True, nogil=True)`` when enabled, identity otherwise."""
    if not USE_NUMBA:
        return fn
    from numba import njit

    return njit(cache=True, nogil=True)(fn)
