"""numba switch.

Set ``GIBBSRARE_NUMBA=0`` to run every hot kernel through its pure-numpy
fallback instead of the compiled loop.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENV_FLAG = "GIBBSRARE_NUMBA"

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and os.environ.get(ENV_FLAG, "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    The compiled variant is built even when ``NUMBA_ENABLED`` is false so that
    benchmarks and cross-path tests can still reach it; dispatch decides which
    path production code takes.
    """
    if NUMBA_AVAILABLE:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        return func

    return decorator
