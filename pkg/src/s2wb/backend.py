"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-NumPy fallback
is used otherwise.  S2WB_BACKEND forces a choice: "compiled"/"c" (error if
unavailable) or "python"/"py".
"""
from __future__ import annotations

import os


def _load():
    choice = os.environ.get("S2WB_BACKEND", "auto").strip().lower()
    if choice in ("python", "py"):
        from . import _kernels_py as mod
        return mod
    if choice in ("compiled", "c"):
        from . import _kernels_c as mod  # ImportError surfaces deliberately
        return mod
    if choice not in ("", "auto"):
        raise ValueError(f"unknown S2WB_BACKEND value: {choice!r}")
    try:
        from . import _kernels_c as mod
    except ImportError:
        from . import _kernels_py as mod
    return mod


kernels = _load()


def backend_name() -> str:
    return kernels.BACKEND
