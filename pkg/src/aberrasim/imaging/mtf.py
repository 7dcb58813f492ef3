"""Modulation transfer functions from kernels and from slanted edges."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ValidationError

NYQUIST = 0.5


@dataclass
class MTFCurve:
    frequency: np.ndarray  # cycles/pixel
    modulation: np.ndarray

    def __call__(self, f):
        return np.interp(f, self.frequency, self.modulation)


class MTF50(NamedTuple):
    frequency: float
    found: bool


def mtf_from_psf(kernel, frequencies=None, n_angles: int = 180) -> MTFCurve:
    """Radially averaged |FT| of a kernel, normalised to 1 at zero frequency.

    The transform is evaluated exactly (as a DTFT of the taps) on circles of
    radius f and averaged over ``n_angles`` directions in [0, pi).
    """
    k = np.asarray(getattr(kernel, "values", kernel), dtype=float)
    if k.ndim != 2:
        raise ValidationError("kernel must be 2-D")
    if frequencies is None:
        frequencies = np.linspace(0.0, NYQUIST, 101)
    f = np.asarray(frequencies, dtype=float)
    rows, cols = np.nonzero(k)
    w = k[rows, cols]
    y = rows - (k.shape[0] - 1) / 2
    x = cols - (k.shape[1] - 1) / 2
    theta = np.pi * np.arange(n_angles) / n_angles
    ux = (f[:, None] * np.cos(theta)[None, :]).ravel()
    uy = (f[:, None] * np.sin(theta)[None, :]).ravel()
    phase = np.exp(-2j * np.pi * (np.outer(ux, x) + np.outer(uy, y)))
    mag = np.abs(phase @ w).reshape(len(f), n_angles).mean(axis=1)
    dc = abs(w.sum())
    if dc == 0:
        raise ValidationError("kernel sums to zero")
    return MTFCurve(f, mag / dc)


def mtf50(curve: MTFCurve, limit: float = NYQUIST) -> MTF50:
    """First frequency where the curve falls to 0.5 (linear interpolation).

    Returns (limit, False) when the curve stays above 0.5 up to ``limit``.
    """
    f, m = curve.frequency, curve.modulation
    sel = f <= limit + 1e-12
    f, m = f[sel], m[sel]
    below = np.nonzero(m < 0.5)[0]
    if below.size == 0 or below[0] == 0:
        return MTF50(float(limit), False) if below.size == 0 else MTF50(float(f[0]), True)
    i = below[0]
    f0, f1, m0, m1 = f[i - 1], f[i], m[i - 1], m[i]
    return MTF50(float(f0 + (0.5 - m0) * (f1 - f0) / (m1 - m0)), True)


def _to_gray(img):
    x = np.asarray(img, dtype=float)
    return x.mean(axis=2) if x.ndim == 3 else x


def slanted_edge_mtf(img, roi=None, oversample: int = 4) -> MTFCurve:
    """Edge-spread based MTF of a slanted edge (ISO 12233 style).

    ``roi`` is (row0, row1, col0, col1). The edge may be near-vertical or
    near-horizontal; horizontal edges are handled by transposing. Steps:
    per-row centroid of the derivative, straight-line fit, projection of
    every pixel onto the edge normal, binning at 1/oversample pixel, central
    difference to the line spread, Hamming window, DFT, and correction for
    the derivative filter's response. Raises ValidationError when no usable
    edge is found.
    """
    x = _to_gray(img)
    if roi is not None:
        r0, r1, c0, c1 = roi
        x = x[r0:r1, c0:c1]
    if x.ndim != 2 or min(x.shape) < 8:
        raise ValidationError("ROI too small for edge analysis")
    if np.ptp(x) < 1e-6:
        raise ValidationError("no edge detected: ROI is flat")
    gy, gx = np.gradient(x)
    if np.abs(gy).sum() > np.abs(gx).sum():
        x = x.T
    H, W = x.shape

    d = np.zeros_like(x)
    d[:, 1:-1] = 0.5 * (x[:, 2:] - x[:, :-2])
    win = np.hamming(W)
    dw = np.abs(d) * win
    tot = dw.sum(axis=1)
    good = tot > 1e-3 * tot.max()
    if good.sum() < 4:
        raise ValidationError("no edge detected")
    centroid = (dw * np.arange(W)).sum(axis=1)[good] / tot[good]
    rows = np.nonzero(good)[0]
    slope, offset = np.polyfit(rows, centroid, 1)
    # refine with a window centred on the fitted edge
    centres = slope * np.arange(H) + offset
    half = W / 2
    cols = np.arange(W)
    ww = np.where(np.abs(cols[None, :] - centres[:, None]) <= half,
                  0.54 + 0.46 * np.cos(np.pi * (cols[None, :] - centres[:, None]) / half), 0.0)
    dw = np.abs(d) * ww
    tot = dw.sum(axis=1)
    good = tot > 1e-3 * tot.max()
    centroid = (dw * cols).sum(axis=1)[good] / tot[good]
    slope, offset = np.polyfit(np.nonzero(good)[0], centroid, 1)
    angle = np.arctan(slope)
    if abs(slope) < 1e-6:
        raise ValidationError("edge is not slanted; cannot oversample")

    # keep a whole number of phase cycles so every sub-pixel bin is sampled evenly
    cycles = int(np.floor(H * abs(slope)))
    if cycles >= 1:
        H = int(round(cycles / abs(slope)))
        x = x[:H]
    yy, xx = np.indices(x.shape)
    dist = (xx - (slope * yy + offset)) * np.cos(angle)
    delta = 1.0 / oversample
    nbins = int(np.floor((dist.max() - dist.min()) / delta))
    edge_lo = -(nbins // 2) * delta
    b = np.floor((dist - edge_lo) / delta).astype(int)
    ok = (b >= 0) & (b < nbins)
    counts = np.bincount(b[ok], minlength=nbins)
    sums = np.bincount(b[ok], weights=x[ok], minlength=nbins)
    pos = np.bincount(b[ok], weights=dist[ok], minlength=nbins)
    filled = counts > 0
    centres_b = np.arange(nbins)
    # each bin's value sits at the mean position of its samples, not the bin centre
    at = (pos[filled] / counts[filled] - edge_lo) / delta - 0.5
    esf = np.interp(centres_b, at, sums[filled] / counts[filled])

    lsf = np.zeros_like(esf)
    lsf[1:-1] = 0.5 * (esf[2:] - esf[:-2])
    lsf[0], lsf[-1] = lsf[1], lsf[-2]
    peak = np.sum(np.abs(lsf) * centres_b) / np.sum(np.abs(lsf))
    n = len(lsf)
    shift = peak - (n - 1) / 2
    t = (centres_b - shift) / (n - 1)
    hamming = np.where((t >= 0) & (t <= 1), 0.54 - 0.46 * np.cos(2 * np.pi * t), 0.0)
    spec = np.abs(np.fft.rfft(lsf * hamming))
    if spec[0] == 0:
        raise ValidationError("no edge detected: zero line-spread energy")
    spec = spec / spec[0]
    freq = np.fft.rfftfreq(n, d=delta)
    corr = np.sinc(2 * freq * delta)
    corr = np.where(corr > 0.1, corr, 0.1)
    mod = spec / corr
    keep = freq <= 1.0
    return MTFCurve(freq[keep], mod[keep])


def write_mtf_csv(curve: MTFCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycles_per_pixel", "modulation"])
        for f, m in zip(curve.frequency, curve.modulation):
            w.writerow([f"{f:.6f}", f"{m:.6f}"])
