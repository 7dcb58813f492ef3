"""Image file I/O in linear [0, 1] floating point."""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp")


def read_image(path) -> np.ndarray:
    """Read an 8- or 16-bit image as float in [0, 1], RGB channel order.

    Pixel values are taken as linear intensities; no gamma decoding is done.
    Alpha channels are dropped. Raises OSError when the file is unreadable.
    """
    path = Path(path)
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        raise OSError(f"cannot read image {path}")
    if data.dtype == np.uint8:
        x = data.astype(float) / 255.0
    elif data.dtype == np.uint16:
        x = data.astype(float) / 65535.0
    else:
        x = data.astype(float)
    if x.ndim == 3:
        x = x[:, :, :3][:, :, ::-1]
        if x.shape[2] == 1:
            x = x[:, :, 0]
    return np.ascontiguousarray(x)


def write_png16(path, img) -> None:
    """Write a [0, 1] image as a 16-bit PNG (linear values, no gamma)."""
    x = np.clip(np.asarray(img, dtype=float), 0.0, 1.0)
    q = np.round(x * 65535.0).astype(np.uint16)
    if q.ndim == 3:
        q = q[:, :, ::-1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), q):
        raise OSError(f"cannot write {path}")


def list_images(directory) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
