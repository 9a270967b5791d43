"""Optional numba acceleration for the hot kernels.

The numba path is used whenever numba imports cleanly. Setting the
environment variable ``LOCHAR_DISABLE_NUMBA=1`` before import forces the
pure-numpy fallback everywhere; both paths compute the same quantities.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None


def _env_flag(name):
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not _env_flag("LOCHAR_DISABLE_NUMBA")


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or a no-op without numba."""
    if not NUMBA_AVAILABLE:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
