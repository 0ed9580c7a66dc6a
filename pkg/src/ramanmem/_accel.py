"""Numba dispatch.

Hot kernels are written twice: a numba ``@njit`` version and a plain numpy
version. Setting ``RAMANMEM_DISABLE_NUMBA=1`` in the environment (before
import) selects the numpy path everywhere; so does a missing numba install.
"""
import os

_FLAG = os.environ.get("RAMANMEM_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def pick(fast, slow):
    """Return the numba implementation if enabled, else the numpy one."""
    return fast if USE_NUMBA else slow


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
