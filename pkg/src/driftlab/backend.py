"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-numpy module is
the fallback.  Both expose the same functions and produce bit-identical
results, so selection only affects speed.  Set DRIFTLAB_BACKEND=python or
DRIFTLAB_BACKEND=compiled to force one (forcing an unavailable compiled
backend raises, which beats silently benchmarking the wrong thing).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def available_backends():
    """Names of importable kernel backends."""
    names = ["python"]
    if _kernels_c is not None:
        names.insert(0, "compiled")
    return names


def get_kernels(name: str | None = None):
    """Kernel module for `name`, or the preferred one when name is None."""
    if name is None:
        name = os.environ.get("DRIFTLAB_BACKEND")
    if name is None:
        return _kernels_c if _kernels_c is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _kernels_c is None:
            raise RuntimeError("compiled kernel backend is not available")
        return _kernels_c
    raise ValueError(f"unknown backend {name!r}; expected 'python' or 'compiled'")


kernels = get_kernels()

BACKEND_NAME = kernels.BACKEND_NAME
