"""Pure-numpy 3x3 convolution kernels (forward and backward).

Layout: feature maps are (H, W, C) float64, weights (3, 3, Cin, Cout).
Padding is fixed at 1, so stride 1 preserves H x W and stride 2 halves even
dimensions exactly.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _pad(x: np.ndarray) -> np.ndarray:
    return np.pad(x, ((1, 1), (1, 1), (0, 0)))


def _out_shape(h: int, w: int, stride: int) -> tuple[int, int]:
    return ((h + 2 - 3) // stride + 1, (w + 2 - 3) // stride + 1)


def conv3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1) -> np.ndarray:
    h, wd, cin = x.shape
    ho, wo = _out_shape(h, wd, stride)
    xp = _pad(x)
    y = np.broadcast_to(b, (ho, wo, w.shape[3])).copy()
    for di in range(3):
        for dj in range(3):
            xs = xp[di : di + stride * ho : stride, dj : dj + stride * wo : stride]
            y += xs @ w[di, dj]
    return y


def conv3x3_backward(
    x: np.ndarray, w: np.ndarray, gy: np.ndarray, stride: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, wd, cin = x.shape
    ho, wo = gy.shape[:2]
    xp = _pad(x)
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    gy_flat = gy.reshape(-1, gy.shape[2])
    for di in range(3):
        for dj in range(3):
            sl_i = slice(di, di + stride * ho, stride)
            sl_j = slice(dj, dj + stride * wo, stride)
            gxp[sl_i, sl_j] += gy @ w[di, dj].T
            xs = np.ascontiguousarray(xp[sl_i, sl_j]).reshape(-1, cin)
            gw[di, dj] = xs.T @ gy_flat
    gb = gy_flat.sum(axis=0)
    return gxp[1:-1, 1:-1], gw, gb
