"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python
reference is the fallback. ``ECHOSIM_KERNELS`` forces a choice:
``auto`` (default), ``cython``, or ``python``. Both backends are
bit-exact twins, so the choice affects speed only.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import pyref

try:
    from . import _core
except ImportError:  # extension not built
    _core = None


def available_backends() -> list[str]:
    names = []
    if _core is not None:
        names.append("cython")
    names.append("python")
    return names


def get_backend(name: str | None = None):
    """Resolve a kernel backend module by name (or by env/auto default)."""
    if name is None:
        name = os.environ.get("ECHOSIM_KERNELS", "auto")
    if name == "python":
        return pyref
    if name == "cython":
        if _core is None:
            raise ConfigError("compiled kernels requested but not built")
        return _core
    if name == "auto":
        return _core if _core is not None else pyref
    raise ConfigError(f"unknown kernel backend {name!r}; expected auto|cython|python")
