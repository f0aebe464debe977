"""Kernel selection: compiled extension when available, NumPy fallback otherwise.

Set ``EVSNOW_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by tests that compare the two implementations).
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels  # type: ignore[attr-defined]
except ImportError:
    _kernels = None

if _kernels is not None and not os.environ.get("EVSNOW_PURE_PYTHON"):
    _impl = _kernels
    HAVE_COMPILED = True
else:
    _impl = _kernels_py
    HAVE_COMPILED = _kernels is not None

classify_events = _impl.classify_events
detect_events = _impl.detect_events

IMPLEMENTATION = "compiled" if _impl is _kernels else "python"


def implementations():
    """All available kernel modules, keyed by name (for benchmarks/tests)."""
    out = {"python": _kernels_py}
    if _kernels is not None:
        out["compiled"] = _kernels
    return out
