"""Kernel backend selection.

The compiled core is used when importable.  ``CCDIM_BACKEND=python`` forces
the numpy fallback; ``CCDIM_BACKEND=cython`` makes a missing extension an
import error instead of a silent fallback.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from types import ModuleType

from . import _pykernels


def _load() -> ModuleType:
    choice = os.environ.get("CCDIM_BACKEND", "").strip().lower()
    if choice == "python":
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        if choice == "cython":
            raise
        return _pykernels
    return _ckernels


kernels: ModuleType = _load()


def available() -> list[str]:
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        return names
    return ["cython", *names]


def get(name: str | None = None) -> ModuleType:
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def set_backend(name: str) -> ModuleType:
    global kernels
    kernels = get(name)
    return kernels


@contextmanager
def use_backend(name: str):
    global kernels
    previous = kernels
    kernels = get(name)
    try:
        yield kernels
    finally:
        kernels = previous
