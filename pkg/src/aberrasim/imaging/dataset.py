"""Paired sharp/degraded dataset generation over a defocus sweep."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..errors import ValidationError
from ..optics.prescription import LensPrescription
from .io import list_images, read_image, write_png16
from .noise import NoiseModel
from .simulate import GridCache, check_distance, degrade

log = logging.getLogger(__name__)

SWEEP_START, SWEEP_STOP, SWEEP_STEP = -125.0, 125.0, 2.5


def default_distances() -> np.ndarray:
    """The 101-point defocus lattice -125:2.5:125 mm."""
    n = int(round((SWEEP_STOP - SWEEP_START) / SWEEP_STEP)) + 1
    return SWEEP_START + SWEEP_STEP * np.arange(n)


def parse_distances(spec: str) -> np.ndarray:
    """Parse ``"a,b,c"`` or ``"start:step:stop"`` (inclusive stop) into distances."""
    spec = spec.strip()
    if ":" in spec:
        parts = [float(s) for s in spec.split(":")]
        if len(parts) != 3 or parts[1] == 0:
            raise ValidationError(f"bad distance range {spec!r}; expected start:step:stop")
        start, step, stop = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValidationError(f"empty distance range {spec!r}")
        values = start + step * np.arange(n)
    else:
        try:
            values = np.array([float(s) for s in spec.split(",") if s.strip()])
        except ValueError:
            raise ValidationError(f"bad distance list {spec!r}") from None
    if values.size == 0:
        raise ValidationError("no distances given")
    for v in values:
        check_distance(v)
    return values


def entry_seed(seed: int, image_index: int, distance_index: int) -> int:
    ss = np.random.SeedSequence([int(seed), image_index, distance_index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ManifestEntry:
    sharp: str
    degraded: str
    distance_mm: float
    seed: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    prescription_sha256: str
    version: str = __version__
    errors: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"version": self.version, "prescription_sha256": self.prescription_sha256,
             "entries": [vars(e) for e in self.entries]}
        if self.errors:
            d["errors"] = self.errors
        return d

    @classmethod
    def from_dict(cls, d) -> "DatasetManifest":
        return cls([ManifestEntry(**e) for e in d["entries"]], d["prescription_sha256"],
                   d["version"], d.get("errors", []))


def _tag(d: float) -> str:
    return f"{d:+07.1f}".replace("+", "p").replace("-", "m").replace(".", "_")


def generate_dataset(sharp_dir, distances, out_dir, prescription: LensPrescription, *,
                     seed: int = 0, noise: tuple[float, float] | None = (1e-3, 1e-4),
                     cache: GridCache | None = None, **psf_options) -> DatasetManifest:
    """Degrade every image in ``sharp_dir`` at every distance and write a manifest.

    Degraded images go to ``out_dir/degraded`` as 16-bit linear PNGs and the
    manifest to ``out_dir/manifest.json``. PSF grids are computed once per
    (distance, image size) and reused. Unreadable inputs are recorded in the
    manifest's ``errors`` list and skipped.
    """
    distances = default_distances() if distances is None else np.asarray(distances, dtype=float)
    for d in distances:
        check_distance(d)
    out_dir = Path(out_dir)
    (out_dir / "degraded").mkdir(parents=True, exist_ok=True)
    cache = cache or GridCache(prescription, **psf_options)
    entries, errors = [], []
    for ii, path in enumerate(list_images(sharp_dir)):
        try:
            img = read_image(path)
        except OSError as exc:
            log.warning("skipping %s: %s", path, exc)
            errors.append({"sharp": str(path), "error": str(exc)})
            continue
        for di, d in enumerate(distances):
            s = entry_seed(seed, ii, di)
            model = NoiseModel(noise[0], noise[1], s) if noise else None
            out = degrade(img, cache.get(float(d), img.shape), model)
            dest = out_dir / "degraded" / f"{path.stem}_d{_tag(float(d))}.png"
            write_png16(dest, out)
            entries.append(ManifestEntry(str(path), str(dest.relative_to(out_dir)), float(d), s))
    manifest = DatasetManifest(entries, prescription.sha256, errors=errors)
    (out_dir / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2))
    return manifest
