"""Optional numba acceleration.

Hot kernels are decorated with :func:`njit`. When numba is missing, or the
environment variable ``FOOTFALL_DISABLE_NUMBA`` is set to a truthy value,
the public entry points in :mod:`footfall.kernels` route to the pure-numpy
implementations instead.
"""

import os

_DISABLED = os.environ.get("FOOTFALL_DISABLE_NUMBA", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def _identity(fn):
        return fn

    return _identity


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
