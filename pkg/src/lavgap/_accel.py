"""Backend selection for the hot kernels.

Every hot kernel ships twice: a loop version compiled with numba and a
vectorised numpy version. ``LAVGAP_NO_NUMBA=1`` (or a missing numba install)
selects the numpy path; both paths agree to rounding.
"""

import os

_DISABLED = os.environ.get("LAVGAP_NO_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when the numba backend is active, identity otherwise."""
    kwargs.setdefault("cache", True)

    def wrap(f):
        return numba.njit(**kwargs)(f) if HAVE_NUMBA else f

    return wrap(func) if func is not None else wrap


def backend():
    return "numba" if HAVE_NUMBA else "numpy"


def pick(numba_impl, numpy_impl):
    """Return the implementation matching the active backend."""
    return numba_impl if HAVE_NUMBA else numpy_impl
