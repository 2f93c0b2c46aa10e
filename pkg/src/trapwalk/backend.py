"""Kernel backend selection.

Hot kernels are written once and compiled with numba when it is available.
Setting ``TRAPWALK_NUMBA=0`` forces the pure numpy/Python fallback path;
``TRAPWALK_NUMBA=1`` makes a missing numba an import error instead of a
silent downgrade.  The chosen backend is fixed at import time and recorded
in every experiment report.
"""
from __future__ import annotations

import os

_flag = os.environ.get("TRAPWALK_NUMBA", "").strip().lower()

if _flag in ("0", "no", "off", "false"):
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _flag in ("1", "yes", "on", "true"):
            raise
        HAS_NUMBA = False


def njit(*args, **kwargs):
    """numba.njit when the numba backend is active, identity otherwise."""
    if HAS_NUMBA:
        import numba

        return numba.njit(*args, **kwargs)
    # plain decorator: leave the Python function untouched
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap


def backend_name() -> str:
    return "numba" if HAS_NUMBA else "numpy"
