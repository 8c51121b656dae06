"""Numba availability and the kernel backend switch.

Set ``COGSEC_DISABLE_NUMBA=1`` before import to force the pure-numpy kernels.
The flag is read once; :func:`use_numba` reports the active backend.
"""
import os

_DISABLED = os.environ.get("COGSEC_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("disabled by COGSEC_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def use_numba():
    return HAVE_NUMBA


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise an identity decorator.

    Kernels decorated this way are only called on the numba path; the
    numpy fallbacks are separate functions, so an undecorated kernel is
    never run in hot loops.
    """
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend_name():
    return "numba" if HAVE_NUMBA else "numpy"
