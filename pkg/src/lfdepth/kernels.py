"""Kernel backend selection.

The compiled extension is used when it imports; set ``LFDEPTH_PURE_PYTHON=1``
to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("LFDEPTH_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

line_alignment = _impl.line_alignment
line_entropy = _impl.line_entropy
anneal_lines = _impl.anneal_lines
trilateral = _impl.trilateral


def backends() -> dict:
    """Every importable backend keyed by name; used by the tests and benchmark."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels

        out["cython"] = _kernels
    except ImportError:
        pass
    return out
