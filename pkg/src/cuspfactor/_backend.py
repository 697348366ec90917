"""Pick the kernel implementation at import time.

``CUSPFACTOR_BACKEND`` may be ``auto`` (default: compiled if importable),
``cython`` (fail if the extension is missing) or ``python``.
"""
from __future__ import annotations

import os

from . import _pykernels

_requested = os.environ.get("CUSPFACTOR_BACKEND", "auto").lower()
if _requested not in ("auto", "cython", "python"):
    raise ImportError(f"unknown CUSPFACTOR_BACKEND {_requested!r}")

if _requested == "python":
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels = _pykernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]
