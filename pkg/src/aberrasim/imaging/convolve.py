"""Spatially varying blur: per-patch convolution with cross-faded seams."""
from __future__ import annotations

import numpy as np
from scipy import ndimage, signal

from ..errors import ValidationError
from ..psf.grid import PSFGrid

DEFAULT_BAND = 8
DIRECT_MAX_SUPPORT = 7


def _as_hwc(img):
    a = np.asarray(img, dtype=float)
    if a.ndim == 2:
        return a[:, :, None], True
    if a.ndim != 3:
        raise ValidationError("image must be H x W or H x W x C")
    return a, False


def _support(k):
    nz = np.nonzero(k)
    if nz[0].size == 0:
        return 0, 0
    return nz[0].max() - nz[0].min() + 1, nz[1].max() - nz[1].min() + 1


def conv_valid(src, k, method: str = "auto"):
    """'valid' 2-D convolution of each channel of ``src`` (h, w, C) with ``k`` (K, K, C).

    ``direct`` accumulates one shifted copy per nonzero tap, so a delta
    kernel reproduces the input bit for bit. ``fft`` uses scipy's
    overlap-free FFT convolution. ``auto`` picks direct when every channel's
    nonzero support fits in 7 x 7.
    """
    K = k.shape[0]
    h, w, C = src.shape
    Ho, Wo = h - K + 1, w - K + 1
    if method == "auto":
        sup = max(max(_support(k[:, :, c])) for c in range(C))
        method = "direct" if sup <= DIRECT_MAX_SUPPORT else "fft"
    if method == "fft":
        return signal.fftconvolve(src, k, mode="valid", axes=(0, 1))
    if method != "direct":
        raise ValidationError(f"unknown convolution method {method!r}")
    out = np.zeros((Ho, Wo, C))
    for c in range(C):
        for a, b in zip(*np.nonzero(k[:, :, c])):
            out[:, :, c] += k[a, b, c] * src[K - 1 - a:K - 1 - a + Ho, K - 1 - b:K - 1 - b + Wo, c]
    return out


def _channel_kernels(grid: PSFGrid, C: int):
    k = grid.kernels  # rows, cols, ch, K, K
    ch = k.shape[2]
    if ch == C:
        return k
    if ch == 1:
        return np.repeat(k, C, axis=2)
    if C == 1:
        g = grid.channels.index("G") if "G" in grid.channels else ch // 2
        return k[:, :, g:g + 1]
    raise ValidationError(f"grid has {ch} channels, image has {C}")


def _blend_1d(pieces, seams, hb, length, axis):
    """Join overlapping pieces along ``axis`` with linear cross-fades of width 2*hb.

    ``pieces[j]`` is (start, array) covering [start, start + len) on the axis.
    Inside a seam zone the result is a + w * (b - a), which is exact when the
    two pieces agree.
    """
    shape = list(pieces[0][1].shape)
    shape[axis] = length
    out = np.empty(shape)

    def sl(arr_start, lo, hi):
        idx = [slice(None)] * len(shape)
        idx[axis] = slice(lo - arr_start, hi - arr_start)
        return tuple(idx)

    def osl(lo, hi):
        idx = [slice(None)] * len(shape)
        idx[axis] = slice(lo, hi)
        return tuple(idx)

    n = len(pieces)
    for j, (start, arr) in enumerate(pieces):
        lo = 0 if j == 0 else seams[j - 1] + hb
        hi = length if j == n - 1 else seams[j] - hb
        out[osl(lo, hi)] = arr[sl(start, lo, hi)]
        if j < n - 1 and hb > 0:
            s = seams[j]
            nstart, narr = pieces[j + 1]
            wshape = [1] * len(shape)
            wshape[axis] = 2 * hb
            wgt = ((np.arange(2 * hb) + 0.5) / (2 * hb)).reshape(wshape)
            a = arr[sl(start, s - hb, s + hb)]
            b = narr[sl(nstart, s - hb, s + hb)]
            out[osl(s - hb, s + hb)] = a + wgt * (b - a)
    return out


def illuminance_map(grid: PSFGrid, shape) -> np.ndarray:
    """Per-pixel relative illuminance, bilinear between patch centres."""
    H, W = shape
    rows, cols = grid.illuminance.shape
    yy = (np.arange(H) + 0.5) * rows / H - 0.5
    xx = (np.arange(W) + 0.5) * cols / W - 0.5
    Y, X = np.meshgrid(yy, xx, indexing="ij")
    return ndimage.map_coordinates(grid.illuminance, [Y, X], order=1, mode="nearest")


def convolve_patchwise(img, grid: PSFGrid, *, band: int = DEFAULT_BAND, method: str = "auto",
                       apply_illuminance: bool = True) -> np.ndarray:
    """Blur ``img`` with the grid's per-patch kernels.

    The image is split into the grid's rows x cols patches (reflect-padded
    at the bottom/right when the size does not divide evenly). Each patch is
    convolved with its own kernel using the surrounding image as context,
    neighbouring patches are cross-faded over ``band`` pixels around every
    seam, and the result is scaled by the interpolated relative illuminance.
    """
    x, squeeze = _as_hwc(img)
    H, W, C = x.shape
    rows, cols = grid.shape
    K = grid.kernel_size
    Hp, Wp = -(-H // rows) * rows, -(-W // cols) * cols
    ph, pw = Hp // rows, Wp // cols
    if K > min(ph, pw):
        raise ValidationError(f"kernel ({K} px) larger than the patch ({ph} x {pw} px)")
    hb = min(band, ph, pw) // 2
    kernels = _channel_kernels(grid, C)

    r = K // 2
    pad_mode = "reflect" if min(H, W) > max(Hp - H, Wp - W) + r + hb else "symmetric"
    padded = np.pad(x, ((r + hb, Hp - H + r + hb), (r + hb, Wp - W + r + hb), (0, 0)), mode=pad_mode)
    # padded[r + hb + y] is image row y (rows >= H are reflect padding)

    strips = []
    for i in range(rows):
        y0, y1 = max(i * ph - hb, 0), min((i + 1) * ph + hb, Hp)
        pieces = []
        for j in range(cols):
            x0, x1 = max(j * pw - hb, 0), min((j + 1) * pw + hb, Wp)
            src = padded[y0 + hb:y1 + hb + 2 * r, x0 + hb:x1 + hb + 2 * r]
            k = kernels[i, j].transpose(1, 2, 0)
            pieces.append((x0, conv_valid(src, k, method)))
        seams = [(j + 1) * pw for j in range(cols - 1)]
        strips.append((y0, _blend_1d(pieces, seams, hb, Wp, axis=1)))
    out = _blend_1d(strips, [(i + 1) * ph for i in range(rows - 1)], hb, Hp, axis=0)[:H, :W]

    if apply_illuminance and not np.all(grid.illuminance == 1.0):
        out = out * illuminance_map(grid, (H, W))[:, :, None]
    return out[:, :, 0] if squeeze else out
