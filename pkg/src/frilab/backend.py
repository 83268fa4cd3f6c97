"""Kernel backend selection: numba-jitted hot loops with a pure-numpy fallback.

Every hot kernel in :mod:`frilab.kernels` exists in two semantically identical
variants.  Which one runs is decided once, at import time:

* ``FRILAB_BACKEND=numba``  force the jitted kernels (error if numba missing),
* ``FRILAB_BACKEND=numpy``  force the pure-numpy/python fallbacks,
* unset                     numba when importable, fallback otherwise.

Kernels draw no randomness of their own; callers pass pre-drawn arrays in, so
the two backends produce bit-identical outputs for identical inputs.
``scripts/benchmark_backends.py`` compares their throughput.
"""

from __future__ import annotations

import os
import warnings

try:
    from numba import njit

    _NUMBA_OK = True
except ImportError:  # pragma: no cover - exercised via FRILAB_BACKEND=numpy
    _NUMBA_OK = False

    def njit(*args, **kwargs):
        """Stand-in decorator when numba is unavailable."""

        def wrap(func):
            return func

        if args and callable(args[0]):
            return args[0]
        return wrap


_ENV_FLAG = "FRILAB_BACKEND"


def _select() -> str:
    requested = os.environ.get(_ENV_FLAG, "").strip().lower()
    if requested == "numba":
        if not _NUMBA_OK:
            raise RuntimeError(
                f"{_ENV_FLAG}=numba requested but numba is not importable"
            )
        return "numba"
    if requested == "numpy":
        return "numpy"
    if requested:
        warnings.warn(
            f"unknown {_ENV_FLAG}={requested!r}; falling back to auto-detect",
            stacklevel=2,
        )
    return "numba" if _NUMBA_OK else "numpy"


_ACTIVE = _select()


def active_backend() -> str:
    """Name of the kernel backend chosen at import time."""
    return _ACTIVE


def has_numba() -> bool:
    return _NUMBA_OK


def use_numba() -> bool:
    return _ACTIVE == "numba"
