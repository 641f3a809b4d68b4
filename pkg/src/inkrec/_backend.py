"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy reference
always works. INKREC_BACKEND=python or INKREC_BACKEND=c forces the choice,
and forcing the compiled backend when it failed to build is an error rather
than a silent fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built on this install
    _ckernels = None


def _select():
    forced = os.environ.get("INKREC_BACKEND", "").strip().lower()
    if forced not in ("", "c", "python"):
        raise ValueError(
            f"INKREC_BACKEND must be 'c' or 'python', got {forced!r}"
        )
    if forced == "python":
        return _pykernels
    if forced == "c":
        if _ckernels is None:
            raise ImportError(
                "INKREC_BACKEND=c but the compiled extension is not available"
            )
        return _ckernels
    return _ckernels if _ckernels is not None else _pykernels


_ACTIVE = _select()


def kernels():
    """The active kernel module (compiled when available)."""
    return _ACTIVE


def active_backend() -> str:
    return _ACTIVE.BACKEND_NAME


def available_backends() -> tuple[str, ...]:
    return ("python", "c") if _ckernels is not None else ("python",)
