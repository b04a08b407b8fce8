"""Optional numba acceleration.

Hot kernels are written twice: a numba ``@njit`` version and a numpy
fallback.  The fallback is used when numba is missing or when the
environment variable ``CONGESTOPT_DISABLE_NUMBA`` is set to a truthy value.
"""
from __future__ import annotations

import os

_FLAG = "CONGESTOPT_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is an optional extra
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _env_disabled()


def njit(func=None, **kwargs):
    """``numba.njit`` with caching, or the identity when numba is unavailable."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        if not NUMBA_AVAILABLE:
            return f
        return _numba.njit(**kwargs)(f)

    if func is None:
        return wrap
    return wrap(func)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
