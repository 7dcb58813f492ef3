"""Full-reference image quality metrics for [0, 1] data."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..errors import ValidationError

PSNR_CAP = 100.0
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11 x 11 window
C1 = 0.01 ** 2
C2 = 0.03 ** 2


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """10 log10(1 / MSE); identical images report PSNR_CAP (100 dB)."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gauss(x):
    return ndimage.gaussian_filter(x, SSIM_SIGMA, mode="reflect", truncate=SSIM_RADIUS / SSIM_SIGMA)


def ssim_map(a, b) -> np.ndarray:
    """Local SSIM of two single-channel images (Gaussian window, symmetric borders)."""
    mu1, mu2 = _gauss(a), _gauss(b)
    s11 = _gauss(a * a) - mu1 * mu1
    s22 = _gauss(b * b) - mu2 * mu2
    s12 = _gauss(a * b) - mu1 * mu2
    return ((2 * mu1 * mu2 + C1) * (2 * s12 + C2)) / ((mu1 ** 2 + mu2 ** 2 + C1) * (s11 + s22 + C2))


def ssim(a, b) -> float:
    """Mean SSIM; multi-channel images average the per-channel means."""
    a, b = _pair(a, b)
    if a.ndim == 2:
        return float(ssim_map(a, b).mean())
    return float(np.mean([ssim_map(a[..., c], b[..., c]).mean() for c in range(a.shape[-1])]))
