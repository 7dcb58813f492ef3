"""Field-dependent PSF grids: one kernel per image patch and colour channel."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..errors import ConvergenceError, NumericalError, ValidationError
from ..optics.paraxial import chief_magnification
from ..optics.prescription import LensPrescription
from .diffraction import DEFAULT_KERNEL_SIZE, DEFAULT_PADDING, PSFKernel, amplitude_spread, image_sampling
from .pupil import (DEFAULT_PUPIL_N, cos4, object_point, pupil_function, reference_wavelength,
                    sample_exit_pupils)

log = logging.getLogger(__name__)

GRID_SIZE = 32
MAX_FAILED_FRACTION = 0.01
FIELD_CHUNK = 16


@dataclass
class PSFGrid:
    """Kernels for a rows x cols patch layout at one defocus distance.

    ``kernels`` has shape (rows, cols, channels, size, size); ``illuminance``
    has shape (rows, cols).
    """

    distance: float
    kernels: np.ndarray
    illuminance: np.ndarray
    channels: tuple[str, ...] = ("R", "G", "B")
    pixel_pitch: float = 0.005
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.kernels.shape[:2]

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[-1]

    def kernel(self, i: int, j: int, channel: int = 0) -> PSFKernel:
        return PSFKernel(self.kernels[i, j, channel], (i, j), self.channels[channel], self.pixel_pitch)

    @classmethod
    def uniform(cls, kernel, rows: int = GRID_SIZE, cols: int = GRID_SIZE, channels: int = 3,
                distance: float = 0.0, illuminance=None) -> "PSFGrid":
        """Grid that uses the same kernel everywhere (handy for stubs and tests)."""
        k = np.asarray(kernel, dtype=float)
        kernels = np.broadcast_to(k, (rows, cols, channels) + k.shape).copy()
        ill = np.ones((rows, cols)) if illuminance is None else np.asarray(illuminance, float)
        names = ("R", "G", "B")[:channels] if channels <= 3 else tuple(str(c) for c in range(channels))
        return cls(float(distance), kernels, ill, names if channels != 1 else ("Y",))

    @classmethod
    def identity(cls, rows=GRID_SIZE, cols=GRID_SIZE, channels=3, size=DEFAULT_KERNEL_SIZE):
        k = np.zeros((size, size))
        k[size // 2, size // 2] = 1.0
        return cls.uniform(k, rows, cols, channels)


def patch_centers(image_shape, pixel_pitch: float, rows: int = GRID_SIZE, cols: int = GRID_SIZE):
    """Sensor coordinates (x, y) in mm of every patch centre, optical axis at the image centre."""
    H, W = image_shape[:2]
    ys = ((np.arange(rows) + 0.5) * H / rows - H / 2) * pixel_pitch
    xs = ((np.arange(cols) + 0.5) * W / cols - W / 2) * pixel_pitch
    return np.meshgrid(xs, ys)


def _resample_to_pixels(intensity, du, offset, size, pitch):
    """Integrate a natively sampled PSF over sensor pixels.

    ``offset`` is the position (x, y) of the native grid centre relative to
    the kernel centre, in mm.
    """
    N = intensity.shape[0]
    if N % 2 == 0:
        # index 0 is the unpaired Nyquist row/column of the centred DFT; drop
        # it so the native support is symmetric about the centre sample
        intensity = intensity.copy()
        intensity[0, :] = 0.0
        intensity[:, 0] = 0.0
    ss = int(min(16, max(2, math.ceil(pitch / du) + 1)))
    sub = ((np.arange(size * ss) + 0.5) / ss - size / 2) * pitch
    yy, xx = np.meshgrid(sub, sub, indexing="ij")
    rows = N // 2 + (yy - offset[1]) / du
    cols = N // 2 + (xx - offset[0]) / du
    vals = ndimage.map_coordinates(intensity, [rows, cols], order=1, mode="grid-constant", cval=0.0)
    return vals.reshape(size, ss, size, ss).sum(axis=(1, 3))


def _batch_kernels(p, objects, pupil_n, padding, size, pitch, illum_method):
    """Polychromatic kernels (F, channels, size, size) and illuminance proxies (F,)."""
    lams = [w.nm for w in p.wavelengths]
    maps = [sample_exit_pupils(p, objects, lam, pupil_n) for lam in lams]
    F = len(objects)
    out = np.zeros((F, len(p.channels), size, size))
    ref = maps[lams.index(reference_wavelength(p))]
    for f in range(F):
        centre = np.mean([m[f].chief_image for m in maps], axis=0)
        for w, mw in zip(p.wavelengths, maps):
            m = mw[f]
            h = amplitude_spread(pupil_function(m), padding)
            du = image_sampling(m.spacing, m.ref_radius, m.wavelength, h.shape[0], m.image_index)
            k = _resample_to_pixels(np.abs(h) ** 2, du, m.chief_image - centre, size, pitch)
            s = k.sum()
            if not s > 0:
                raise NumericalError("PSF fell outside the kernel window")
            out[f, p.channels.index(w.channel)] += w.weight * k / s
    out /= out.sum(axis=(2, 3), keepdims=True)
    if illum_method == "rays":
        frac = np.array([m.transmitted_fraction for m in ref])
    else:
        frac = np.array([cos4(m.chief_angle) for m in ref])
    return out, frac


def psf_grid(p: LensPrescription, d: float, image_shape, *, pupil_n: int = DEFAULT_PUPIL_N,
             padding: int = DEFAULT_PADDING, kernel_size: int = DEFAULT_KERNEL_SIZE,
             grid: int = GRID_SIZE, pixel_pitch: float | None = None, illuminance: str = "rays",
             symmetry: bool = True, threads: int = 1) -> PSFGrid:
    """Compute the grid x grid PSF layout for an image of ``image_shape`` at defocus ``d`` (mm).

    Each patch centre on the sensor is mapped to an object point through the
    paraxial chief-ray magnification at the reference wavelength. Per channel,
    the kernel is the weighted sum of the per-wavelength PSFs, all resampled
    around the wavelength-averaged chief-ray image point so lateral colour is
    retained. With ``symmetry`` the rotational symmetry of the lens is used to
    compute one quadrant and mirror it. Results do not depend on ``threads``.
    """
    if kernel_size % 2 == 0:
        raise ValidationError("kernel_size must be odd")
    if illuminance not in ("rays", "cos4"):
        raise ValidationError(f"unknown illuminance method {illuminance!r}")
    pitch = p.pixel_pitch if pixel_pitch is None else float(pixel_pitch)
    lam_ref = reference_wavelength(p)
    m = chief_magnification(p, p.focus_distance + d, lam_ref)
    xs, ys = patch_centers(image_shape, pitch, grid, grid)

    symmetry = symmetry and grid % 2 == 0
    rows = range(grid // 2, grid) if symmetry else range(grid)
    cols = range(grid // 2, grid) if symmetry else range(grid)
    todo = [(i, j) for i in rows for j in cols]
    # fixed chunking keeps results independent of the thread count
    chunks = [todo[k:k + FIELD_CHUNK] for k in range(0, len(todo), FIELD_CHUNK)]

    def work(chunk):
        objs = np.array([object_point(p, (xs[i, j] / m, ys[i, j] / m), d) for i, j in chunk])
        try:
            return [(ij, r) for ij, r in zip(chunk, zip(*_batch_kernels(
                p, objs, pupil_n, padding, kernel_size, pitch, illuminance)))]
        except (ConvergenceError, NumericalError):
            pass
        out = []
        for ij, o in zip(chunk, objs):
            try:
                k, f = _batch_kernels(p, o[None], pupil_n, padding, kernel_size, pitch, illuminance)
                out.append((ij, (k[0], f[0])))
            except (ConvergenceError, NumericalError) as exc:
                out.append((ij, exc))
        return out

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = [r for chunk in pool.map(work, chunks) for r in chunk]
    else:
        results = [r for chunk in chunks for r in work(chunk)]

    nch = len(p.channels)
    kernels = np.zeros((grid, grid, nch, kernel_size, kernel_size))
    frac = np.zeros((grid, grid))
    failed = []
    for (i, j), res in results:
        if isinstance(res, Exception):
            failed.append(((i, j), res))
            kernels[i, j, :, kernel_size // 2, kernel_size // 2] = 1.0
            frac[i, j] = np.nan
        else:
            kernels[i, j], frac[i, j] = res
    if len(failed) > MAX_FAILED_FRACTION * len(todo):
        raise NumericalError(f"{len(failed)} of {len(todo)} fields failed; first: {failed[0][1]}")
    for (i, j), exc in failed:
        log.warning("field (%d, %d) failed (%s); using a delta kernel", i, j, exc)

    if symmetry:
        h = grid // 2
        kernels[:h, h:] = kernels[h:, h:][::-1, :, :, ::-1, :]
        frac[:h, h:] = frac[h:, h:][::-1]
        kernels[:, :h] = kernels[:, h:][:, ::-1, :, :, ::-1]
        frac[:, :h] = frac[:, h:][:, ::-1]

    if illuminance == "rays":
        axis = _batch_kernels(p, object_point(p, (0.0, 0.0), d)[None], pupil_n, padding,
                              kernel_size, pitch, "rays")[1][0]
        ill = frac / axis
    else:
        ill = frac
    ill = np.where(np.isfinite(ill), ill, np.nanmin(ill) if np.isfinite(ill).any() else 1.0)
    ill = np.clip(ill, 1e-12, 1.0)
    return PSFGrid(float(d), kernels, ill, p.channels, pitch,
                   meta={"pupil_n": pupil_n, "padding": padding, "failed_fields": len(failed)})
