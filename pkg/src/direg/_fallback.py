"""Pure-numpy versions of the compiled kernels (same signatures)."""
from __future__ import annotations

import math

import numpy as np


def mean_sq_diff(values: np.ndarray, ip: np.ndarray, im: np.ndarray) -> float:
    if values.shape[0] == 0 or ip.size == 0:
        raise ValueError("empty input")
    d = values[:, ip] - values[:, im]
    return float(np.einsum("ij,ij->", d, d) / d.size)


def mean_cross_diff(values: np.ndarray, i0: np.ndarray, i1: np.ndarray, i2: np.ndarray) -> float:
    if values.shape[0] == 0 or i0.size == 0:
        raise ValueError("empty input")
    a = values[:, i0] - values[:, i1]
    b = values[:, i1] - values[:, i2]
    return float(np.einsum("ij,ij->", a, b) / a.size)


def nw_grid_smooth(img: np.ndarray, eval_pts: np.ndarray, c: float, s: float, h1: float, h2: float) -> np.ndarray:
    n = img.shape[0]
    w1 = h1 * abs(c) + h2 * abs(s)
    w2 = h1 * abs(s) + h2 * abs(c)
    axis = np.arange(1, n + 1) / n
    out = np.zeros(len(eval_pts))
    for e, (t1, t2) in enumerate(eval_pts):
        plo = max(1, math.floor((t1 - w1) * n))
        phi = min(n, math.ceil((t1 + w1) * n))
        qlo = max(1, math.floor((t2 - w2) * n))
        qhi = min(n, math.ceil((t2 + w2) * n))
        if plo > phi or qlo > qhi:
            continue
        d1 = axis[plo - 1:phi] - t1
        d2 = axis[qlo - 1:qhi] - t2
        z1 = (c * d1[:, None] + s * d2[None, :]) / h1
        z2 = (-s * d1[:, None] + c * d2[None, :]) / h2
        w = np.where((np.abs(z1) <= 1.0) & (np.abs(z2) <= 1.0), (1.0 - z1 * z1) * (1.0 - z2 * z2), 0.0)
        den = w.sum()
        if den > 0.0:
            out[e] = float((w * img[plo - 1:phi, qlo - 1:qhi]).sum() / den)
    return out
