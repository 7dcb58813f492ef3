"""Bijective tensor rearrangements and invertible channel mixing."""
from __future__ import annotations

import numpy as np

from ..errors import NumericalError, ValidationError

SINGULAR_DET = 1e-8


def squeeze(t: np.ndarray) -> np.ndarray:
    """C x H x W -> 4C x H/2 x W/2 by 2 x 2 checkerboard sub-lattices.

    Sub-lattice order (column parity, row parity): even-even, odd-even,
    even-odd, odd-odd; each sub-lattice contributes a block of C channels.
    """
    if t.ndim != 3:
        raise ValidationError("expected a C x H x W tensor")
    C, H, W = t.shape
    if H % 2 or W % 2:
        raise ValidationError(f"squeeze needs even height and width, got {H} x {W}")
    return np.concatenate([t[:, 0::2, 0::2], t[:, 0::2, 1::2], t[:, 1::2, 0::2], t[:, 1::2, 1::2]])


def unsqueeze(t: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`squeeze`."""
    if t.ndim != 3 or t.shape[0] % 4:
        raise ValidationError("unsqueeze needs a channel count divisible by 4")
    C4, h, w = t.shape
    C = C4 // 4
    out = np.empty((C, 2 * h, 2 * w), dtype=t.dtype)
    out[:, 0::2, 0::2] = t[:C]
    out[:, 0::2, 1::2] = t[C:2 * C]
    out[:, 1::2, 0::2] = t[2 * C:3 * C]
    out[:, 1::2, 1::2] = t[3 * C:]
    return out


class ChannelMix:
    """Invertible 1x1 convolution: per-pixel multiplication by a C x C matrix.

    The inverse and log|det| are computed once, in float64.
    """

    def __init__(self, W):
        W = np.asarray(W)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("mixing matrix must be square")
        sign, logdet = np.linalg.slogdet(W.astype(np.float64))
        if sign == 0 or logdet < np.log(SINGULAR_DET):
            raise NumericalError("mixing matrix is singular (|det| < 1e-8)")
        self.W = W
        self.W_inv = np.linalg.inv(W.astype(np.float64)).astype(W.dtype)
        self.logdet = float(logdet)

    @classmethod
    def random_orthogonal(cls, C: int, rng, dtype=np.float64) -> "ChannelMix":
        q, r = np.linalg.qr(rng.standard_normal((C, C)))
        q = q * np.sign(np.diag(r))
        return cls(q.astype(dtype))

    def forward(self, t):
        return mix_channels(t, self.W)

    def inverse(self, t):
        return mix_channels(t, self.W_inv)


def mix_channels(t: np.ndarray, W: np.ndarray) -> np.ndarray:
    return np.tensordot(W.astype(t.dtype, copy=False), t, axes=(1, 0))


def unmix_channels(t: np.ndarray, W: np.ndarray) -> np.ndarray:
    sign, logdet = np.linalg.slogdet(np.asarray(W, dtype=np.float64))
    if sign == 0 or logdet < np.log(SINGULAR_DET):
        raise NumericalError("mixing matrix is singular (|det| < 1e-8)")
    return mix_channels(t, np.linalg.inv(np.asarray(W, dtype=np.float64)).astype(t.dtype))
