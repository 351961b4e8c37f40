"""Kernel backend selection.

The compiled Cython extension is used when importable; the numpy
implementation is the fallback. Set LANGGROUND_KERNELS=numpy|cython to force
a backend (cython raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import kernels_numpy

_choice = os.environ.get("LANGGROUND_KERNELS", "auto").lower()

if _choice == "numpy":
    _impl = kernels_numpy
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "cython":
            raise
        _impl = kernels_numpy

BACKEND: str = _impl.BACKEND
conv3x3 = _impl.conv3x3
conv3x3_backward = _impl.conv3x3_backward
