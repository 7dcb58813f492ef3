"""Fraunhofer propagation from the pupil to the image plane."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError, ValidationError

DEFAULT_PADDING = 4
DEFAULT_KERNEL_SIZE = 25


@dataclass
class PSFKernel:
    values: np.ndarray
    field: tuple[int, int] | None = None
    tag: str | float | None = None
    pixel_pitch: float | None = None

    @property
    def size(self) -> int:
        return self.values.shape[0]


def amplitude_spread(P: np.ndarray, padding: int = DEFAULT_PADDING) -> np.ndarray:
    """Centred DFT of the zero-padded pupil function.

    The returned grid has ``padding * n`` samples per side with the zero
    frequency at index ``N // 2``.
    """
    if padding < 1:
        raise ValidationError("padding factor must be >= 1")
    n = P.shape[0]
    N = int(round(padding * n))
    buf = np.zeros((N, N), dtype=complex)
    o = (N - n) // 2
    buf[o:o + n, o:o + n] = P
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(buf)))


def image_sampling(pupil_spacing: float, ref_radius: float, wavelength_nm: float, N: int,
                   image_index: float = 1.0) -> float:
    """Image-plane sample pitch (mm) of an N-point DFT of a pupil with the given spacing."""
    return wavelength_nm * 1e-6 * ref_radius / (image_index * N * pupil_spacing)


def psf_from_asf(h: np.ndarray, out_size: int = DEFAULT_KERNEL_SIZE, center=None) -> PSFKernel:
    """|h|^2 cropped to an ``out_size`` window and normalised to unit sum.

    The window is centred on the intensity centroid unless ``center``
    (row, col) is given. Samples outside ``h`` count as zero.
    """
    if out_size % 2 == 0 or out_size < 1:
        raise ValidationError("out_size must be odd")
    if out_size > min(h.shape):
        raise ValidationError("out_size larger than the amplitude grid")
    I = np.abs(h) ** 2
    total = I.sum()
    if not total > 0 or not np.isfinite(total):
        raise NumericalError("amplitude spread function is identically zero")
    if center is None:
        rows, cols = np.indices(I.shape)
        center = ((rows * I).sum() / total, (cols * I).sum() / total)
    cr, cc = (int(round(c)) for c in center)
    half = out_size // 2
    out = np.zeros((out_size, out_size))
    r0, c0 = cr - half, cc - half
    rs, cs = max(r0, 0), max(c0, 0)
    re, ce = min(r0 + out_size, I.shape[0]), min(c0 + out_size, I.shape[1])
    if rs < re and cs < ce:
        out[rs - r0:re - r0, cs - c0:ce - c0] = I[rs:re, cs:ce]
    s = out.sum()
    if not s > 0:
        raise NumericalError("PSF window holds no energy")
    return PSFKernel(out / s)
