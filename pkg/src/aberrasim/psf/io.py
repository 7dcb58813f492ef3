"""PSF grid file format and inspection mosaics.

Layout (little-endian)::

    b"PSFG"                     magic
    u16                         version (1)
    u32 x 4                     rows, cols, channels, size
    f64                         defocus distance d (mm)
    f32[rows*cols*channels*size*size]   kernels, C order (rows, cols, channels, size, size)
    f32[rows*cols]              relative illuminance
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from .grid import PSFGrid

MAGIC = b"PSFG"
VERSION = 1
_HEADER = struct.Struct("<4sH4Id")


def psfg_bytes(grid: PSFGrid) -> bytes:
    rows, cols, ch, size, _ = grid.kernels.shape
    head = _HEADER.pack(MAGIC, VERSION, rows, cols, ch, size, float(grid.distance))
    return (head + grid.kernels.astype("<f4").tobytes()
            + grid.illuminance.astype("<f4").tobytes())


def write_psfg(grid: PSFGrid, path) -> None:
    Path(path).write_bytes(psfg_bytes(grid))


def parse_psfg(buf: bytes, channels=None, pixel_pitch: float = 0.005) -> PSFGrid:
    if len(buf) < _HEADER.size:
        raise ValidationError("PSFG: truncated header")
    magic, version, rows, cols, ch, size, d = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValidationError(f"PSFG: bad magic {magic!r}")
    if version != VERSION:
        raise ValidationError(f"PSFG: unsupported version {version}")
    nk = rows * cols * ch * size * size
    expected = _HEADER.size + 4 * (nk + rows * cols)
    if len(buf) != expected:
        raise ValidationError(f"PSFG: expected {expected} bytes, got {len(buf)}")
    k = np.frombuffer(buf, "<f4", nk, _HEADER.size).reshape(rows, cols, ch, size, size)
    ill = np.frombuffer(buf, "<f4", rows * cols, _HEADER.size + 4 * nk).reshape(rows, cols)
    if channels is None:
        channels = ("R", "G", "B")[:ch] if ch <= 3 and ch != 1 else ("Y",) if ch == 1 else tuple(map(str, range(ch)))
    return PSFGrid(float(d), k.astype(float), ill.astype(float), tuple(channels), pixel_pitch)


def read_psfg(path, **kwargs) -> PSFGrid:
    return parse_psfg(Path(path).read_bytes(), **kwargs)


def kernel_mosaic(grid: PSFGrid, floor: float = 1e-5, gap: int = 1) -> np.ndarray:
    """8-bit mosaic of log10-scaled kernels, one tile per patch.

    Each tile is scaled to its own peak; values below ``floor`` times the
    peak map to black. Returns (H, W, 3) for RGB grids, (H, W) otherwise.
    """
    rows, cols, ch, size, _ = grid.kernels.shape
    k = grid.kernels
    peak = k.max(axis=(2, 3, 4), keepdims=True)
    rel = np.clip(k / np.where(peak > 0, peak, 1.0), floor, 1.0)
    tiles = (np.log10(rel) / -np.log10(floor) + 1.0)
    step = size + gap
    out = np.zeros((rows * step - gap, cols * step - gap, ch))
    for i in range(rows):
        for j in range(cols):
            out[i * step:i * step + size, j * step:j * step + size] = tiles[i, j].transpose(1, 2, 0)
    img = np.round(out * 255).astype(np.uint8)
    return img[..., 0] if ch == 1 else img[..., :3]


def write_mosaic_png(grid: PSFGrid, path, **kwargs) -> None:
    from PIL import Image

    Image.fromarray(kernel_mosaic(grid, **kwargs)).save(path)
