"""Kernel backend selection.

The compiled extension ``lprnn._ckernels`` is used when it imports; otherwise
the pure-Python module ``lprnn._pykernels`` is used. Setting the environment
variable ``LPRNN_PURE_PYTHON=1`` forces the fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

python_kernels = _pykernels
compiled_kernels = None

if os.environ.get("LPRNN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_kernels  # type: ignore[no-redef]
    except ImportError:
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
NAME = "cython" if kernels is compiled_kernels else "python"


def use(name: str) -> None:
    """Switch the active backend at runtime (``"cython"`` or ``"python"``)."""
    global kernels, NAME
    if name == "python":
        kernels, NAME = python_kernels, "python"
    elif name == "cython":
        if compiled_kernels is None:
            raise ImportError("compiled kernels are not built")
        kernels, NAME = compiled_kernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")
