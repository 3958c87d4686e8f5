"""Kernel backend selection: numba-jitted or pure Python.

The hot numeric loops in :mod:`canonsys._kernels` are written so that the same
source runs under numba's nopython mode and under plain CPython.  Which one is
used is decided once at import time from the environment variable

    CANONSYS_BACKEND = auto | numba | numpy

``auto`` (the default) uses numba when it is importable and falls back to the
pure-numpy path otherwise.  ``numpy`` forces the fallback (useful for
debugging and for the backend benchmark), ``numba`` fails loudly when numba is
missing.
"""

import os

_ENV_VAR = "CANONSYS_BACKEND"

_numba_opts = {
    "nogil": True,
    "cache": True,
    "fastmath": False,
}


def _requested() -> str:
    value = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if value not in ("auto", "numba", "numpy"):
        raise RuntimeError(
            f"{_ENV_VAR} must be one of auto|numba|numpy, got {value!r}"
        )
    return value


def _resolve():
    mode = _requested()
    if mode == "numpy":
        return "numpy", None
    try:
        import numba
    except ImportError:
        if mode == "numba":
            raise RuntimeError(
                f"{_ENV_VAR}=numba but numba is not importable"
            ) from None
        return "numpy", None
    return "numba", numba


BACKEND, _numba = _resolve()
USING_NUMBA = BACKEND == "numba"


def jit_compile(fn):
    """Wrap ``fn`` with numba.njit on the numba backend, return it as-is otherwise."""
    if USING_NUMBA:
        return _numba.njit(**_numba_opts)(fn)
    return fn
