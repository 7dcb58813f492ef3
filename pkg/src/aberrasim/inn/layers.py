"""Minimal numpy convolution layers for (C, H, W) tensors, inference only."""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LEAK = 0.2


def conv2d(x, w, b=None, stride: int = 1):
    """Zero-padded 'same' cross-correlation: x (C, H, W), w (O, C, k, k) -> (O, H', W')."""
    O, C, kh, kw = w.shape
    if x.shape[0] != C:
        raise ValueError(f"conv expects {C} input channels, got {x.shape[0]}")
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # C, H, W, kh, kw
    if stride > 1:
        win = win[:, ::stride, ::stride]
    out = np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4]))  # O, H', W'
    if b is not None:
        out = out + b[:, None, None]
    return out.astype(x.dtype, copy=False)


def leaky_relu(x):
    return np.where(x > 0, x, x * x.dtype.type(LEAK))


def upsample2(x, shape=None):
    y = x.repeat(2, axis=1).repeat(2, axis=2)
    if shape is not None:
        y = y[:, :shape[0], :shape[1]]
    return y


def he_normal(rng, shape, dtype=np.float64, scale: float = 1.0):
    fan_in = int(np.prod(shape[1:]))
    return (rng.standard_normal(shape) * scale * np.sqrt(2.0 / fan_in)).astype(dtype)
