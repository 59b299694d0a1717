"""Kernel backend selection.

Hot loops (message passing, belief propagation, GF(2) elimination) exist in
two forms: an ``@njit`` loop kernel and a vectorised numpy kernel. The numba
path is used when numba imports and ``SPOTFS_DISABLE_NUMBA`` is unset; the
flag is read on every dispatch so tests can flip it with ``monkeypatch``.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False
    logger.warning("numba not importable, falling back to numpy kernels")

_FALSY = {"", "0", "false", "no", "off"}


def use_numba() -> bool:
    if not HAS_NUMBA:
        return False
    return os.environ.get("SPOTFS_DISABLE_NUMBA", "0").strip().lower() in _FALSY


def backend() -> str:
    return "numba" if use_numba() else "numpy"


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    kwargs.setdefault("cache", True)
    if not HAS_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)
