"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over. Setting SWARMFOLD_PURE_PYTHON=1 forces the
fallback.
"""
import os

if os.environ.get("SWARMFOLD_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as kernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        from . import _pykernels as kernels
        BACKEND = "python"

from . import _pykernels as pykernels

__all__ = ["kernels", "pykernels", "BACKEND"]
