"""Voting kernel backend selection.

The compiled Cython kernels are preferred; the numpy reference twin is used
when the extension is unavailable or when ``PRIMFIT_KERNELS=numpy`` is set
(useful for benchmarking and for verifying the backends agree).  Both
backends are bit-identical by construction.
"""

from __future__ import annotations

import os

from . import _reference

if os.environ.get("PRIMFIT_KERNELS", "").lower() in {"numpy", "python", "reference"}:
    _impl = _reference
else:
    try:
        from . import _voting as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _reference

BACKEND: str = _impl.BACKEND

vote_plane = _impl.vote_plane
vote_circle = _impl.vote_circle
vote_torus = _impl.vote_torus
vote_planes_box = _impl.vote_planes_box

reference = _reference

__all__ = [
    "BACKEND",
    "vote_plane",
    "vote_circle",
    "vote_torus",
    "vote_planes_box",
    "reference",
]
