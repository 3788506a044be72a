"""Backend selection for the frame kernels.

The compiled extension (rsnnsim.accel._cycle, Cython) is used when present;
otherwise the pure-Python fallback takes over. RSNNSIM_BACKEND=compiled or
=fallback forces the choice (the former raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import ref as _fallback


def _load_compiled():
    from rsnnsim.accel import _cycle

    return _cycle


_forced = os.environ.get("RSNNSIM_BACKEND", "").lower()
if _forced == "fallback":
    active = _fallback
elif _forced == "compiled":
    active = _load_compiled()
else:
    try:
        active = _load_compiled()
    except ImportError:
        active = _fallback

BACKEND = active.BACKEND_NAME


def get_kernels(name: str | None = None):
    """Return a kernel module by name ('compiled'/'fallback'), default active."""
    if name is None:
        return active
    if name == "fallback":
        return _fallback
    if name == "compiled":
        return _load_compiled()
    raise ValueError(f"unknown backend {name!r}")
