"""Kernel backend selection.

The compiled kernels are used when the extension imports; otherwise the numpy
versions are used. ``DYNKINLAB_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None

_active: ModuleType = _kernels_py
if _kernels_c is not None and os.environ.get("DYNKINLAB_BACKEND", "").lower() != "python":
    _active = _kernels_c


def kernels() -> ModuleType:
    return _active


def name() -> str:
    return "cython" if _active is _kernels_c and _kernels_c is not None else "python"


def available() -> list[str]:
    return ["python"] + (["cython"] if _kernels_c is not None else [])


def set_backend(which: str) -> None:
    """Switch between ``"cython"`` and ``"python"``."""
    global _active
    if which == "python":
        _active = _kernels_py
    elif which == "cython":
        if _kernels_c is None:
            raise RuntimeError("compiled kernels are not built")
        _active = _kernels_c
    else:
        raise ValueError(f"unknown backend {which!r}")
