"""Backend selection for the hot loops.

The compiled extension is used when it imports; ``DIREG_BACKEND=python``
forces the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("DIREG_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _fallback

__all__ = ["BACKEND", "mean_sq_diff", "mean_cross_diff", "nw_grid_smooth", "get_backend"]


def get_backend(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def _idx(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.int64)


def mean_sq_diff(values, ip, im) -> float:
    return float(_impl.mean_sq_diff(np.ascontiguousarray(values, dtype=float), _idx(ip), _idx(im)))


def mean_cross_diff(values, i0, i1, i2) -> float:
    return float(_impl.mean_cross_diff(np.ascontiguousarray(values, dtype=float), _idx(i0), _idx(i1), _idx(i2)))


def nw_grid_smooth(img, eval_pts, c: float, s: float, h1: float, h2: float) -> np.ndarray:
    pts = np.ascontiguousarray(np.asarray(eval_pts, dtype=float).reshape(-1, 2))
    return np.asarray(_impl.nw_grid_smooth(np.ascontiguousarray(img, dtype=float), pts, float(c), float(s), float(h1), float(h2)))
