"""Backend switch for the compiled kernels.

Set ``MAGRFK_NUMBA=0`` in the environment to force the pure-numpy paths.
"""
import os

_flag = os.environ.get("MAGRFK_NUMBA", "1").strip().lower()
_wanted = _flag not in ("0", "false", "no", "off")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _wanted


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    kwargs.setdefault("cache", True)
    if args and callable(args[0]):
        return _numba_njit(**kwargs)(args[0]) if HAVE_NUMBA else args[0]
    if not HAVE_NUMBA:
        return lambda f: f
    return _numba_njit(*args, **kwargs)
