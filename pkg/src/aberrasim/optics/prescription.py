"""Lens prescriptions: validation, JSON round trip and the bundled stand-in lens."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from ..errors import PrescriptionError
from .surfaces import Surface

CHANNELS = ("R", "G", "B", "Y")
DEFAULT_WAVELENGTHS = ((656.3, "R", 1.0), (587.6, "G", 1.0), (486.1, "B", 1.0))
DEFAULT_PIXEL_PITCH = 0.005
DEFAULT_FOCUS_DISTANCE = 500.0


@dataclass(frozen=True)
class Wavelength:
    nm: float
    channel: str
    weight: float = 1.0


@dataclass(frozen=True)
class LensPrescription:
    """Ordered surfaces from object space to the image plane.

    The first surface vertex sits at z = 0; each ``thickness`` is the axial
    distance to the next vertex. ``focus_distance`` is the object distance
    (mm, measured from the first vertex) that is in focus on the image plane.
    """

    surfaces: tuple[Surface, ...]
    stop_index: int
    wavelengths: tuple[Wavelength, ...] = tuple(Wavelength(*w) for w in DEFAULT_WAVELENGTHS)
    pixel_pitch: float = DEFAULT_PIXEL_PITCH
    focus_distance: float = DEFAULT_FOCUS_DISTANCE
    name: str = ""
    object_index: float = field(default=1.0, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        object.__setattr__(self, "wavelengths", tuple(self.wavelengths))
        surfs = self.surfaces
        if len(surfs) < 2:
            raise PrescriptionError("surfaces: need at least a stop and an image plane")
        stops = [i for i, s in enumerate(surfs) if s.kind == "stop"]
        if len(stops) != 1:
            raise PrescriptionError(f"surfaces: exactly one stop required, found {len(stops)}")
        if stops[0] != self.stop_index:
            raise PrescriptionError(
                f"stop_index: {self.stop_index} does not point at the stop surface ({stops[0]})")
        if surfs[-1].kind != "image-plane":
            raise PrescriptionError("surfaces: last surface must be the image plane")
        if any(s.kind == "image-plane" for s in surfs[:-1]):
            raise PrescriptionError("surfaces: image plane must be last")
        if not self.wavelengths:
            raise PrescriptionError("wavelengths: empty")
        for w in self.wavelengths:
            if w.channel not in CHANNELS:
                raise PrescriptionError(f"wavelengths: unknown channel {w.channel!r}")
            if not w.nm > 0 or w.weight < 0:
                raise PrescriptionError("wavelengths: nm must be positive and weight non-negative")
        for ch in self.channels:
            total = sum(w.weight for w in self.wavelengths if w.channel == ch)
            if abs(total - 1.0) > 1e-9:
                raise PrescriptionError(f"wavelengths: weights of channel {ch} sum to {total}, not 1")
        if not self.pixel_pitch > 0:
            raise PrescriptionError("pixel_pitch must be positive")

    @property
    def channels(self) -> tuple[str, ...]:
        seen = []
        for w in self.wavelengths:
            if w.channel not in seen:
                seen.append(w.channel)
        return tuple(sorted(seen, key=CHANNELS.index))

    @cached_property
    def vertex_z(self) -> np.ndarray:
        t = np.array([s.thickness for s in self.surfaces[:-1]], dtype=float)
        return np.concatenate([[0.0], np.cumsum(t)])

    @property
    def image_z(self) -> float:
        return float(self.vertex_z[-1])

    def indices(self, wavelength_nm: float) -> np.ndarray:
        """Refractive index of the medium *after* every surface."""
        n = np.empty(len(self.surfaces))
        prev = self.object_index
        for i, s in enumerate(self.surfaces):
            prev = float(s.index_at(wavelength_nm)) if s.index else prev
            n[i] = prev
        return n

    def with_image_distance(self, thickness: float) -> "LensPrescription":
        """Copy with the last air gap (to the image plane) replaced."""
        surfs = list(self.surfaces)
        last = surfs[-2]
        surfs[-2] = Surface(last.kind, last.curvature, last.aspheric, last.semi_diameter,
                            thickness, last.index)
        return replace_surfaces(self, surfs)

    def to_dict(self) -> dict:
        out = {"name": self.name} if self.name else {}
        out.update(focus_distance=self.focus_distance, pixel_pitch=self.pixel_pitch,
                   stop_index=self.stop_index, surfaces=[], wavelengths=[])
        for s in self.surfaces:
            d = {"type": s.kind}
            if s.curvature:
                d["curvature"] = s.curvature
            if s.aspheric:
                d["aspheric"] = {str(k): v for k, v in s.aspheric.items()}
            if np.isfinite(s.semi_diameter):
                d["semi_diameter"] = s.semi_diameter
            if s.kind != "image-plane":
                d["thickness"] = s.thickness
            if s.refracts:
                d["index"] = {_fmt_nm(k): v for k, v in s.index.items()}
            out["surfaces"].append(d)
        out["wavelengths"] = [{"nm": w.nm, "channel": w.channel, "weight": w.weight}
                              for w in self.wavelengths]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @cached_property
    def sha256(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def _fmt_nm(nm: float) -> str:
    return f"{nm:g}"


def replace_surfaces(p: LensPrescription, surfaces: Sequence[Surface]) -> LensPrescription:
    return LensPrescription(tuple(surfaces), p.stop_index, p.wavelengths, p.pixel_pitch,
                            p.focus_distance, p.name, p.object_index)


def _schema() -> dict:
    text = resources.files("aberrasim.data").joinpath("schemas/prescription.schema.json").read_text()
    return json.loads(text)


def prescription_from_dict(doc: dict) -> LensPrescription:
    """Validate ``doc`` against the prescription schema and build the object.

    Error messages name the offending field as a JSON path.
    """
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise PrescriptionError(f"{path}: {exc.message}") from None

    surfaces = []
    prev_index = {587.6: 1.0}
    for i, sd in enumerate(doc["surfaces"]):
        kind = sd["type"]
        if kind in ("spherical", "aspheric") and "index" not in sd:
            raise PrescriptionError(f"surfaces/{i}/index: required for refracting surfaces")
        if kind in ("spherical", "aspheric", "stop") and "semi_diameter" not in sd:
            raise PrescriptionError(f"surfaces/{i}/semi_diameter: required")
        if kind != "image-plane" and "thickness" not in sd:
            raise PrescriptionError(f"surfaces/{i}/thickness: required")
        index = {float(k): v for k, v in sd.get("index", {}).items()} or prev_index
        try:
            surf = Surface(
                kind=kind,
                curvature=sd.get("curvature", 0.0),
                aspheric={int(k): v for k, v in sd.get("aspheric", {}).items()},
                semi_diameter=sd.get("semi_diameter", np.inf),
                thickness=sd.get("thickness", 0.0),
                index=index,
            )
        except PrescriptionError as exc:
            raise PrescriptionError(f"surfaces/{i}: {exc}") from None
        surfaces.append(surf)
        prev_index = surf.index
    waves = tuple(Wavelength(w["nm"], w["channel"], w["weight"]) for w in doc["wavelengths"])
    return LensPrescription(
        tuple(surfaces), doc["stop_index"], waves,
        pixel_pitch=doc.get("pixel_pitch", DEFAULT_PIXEL_PITCH),
        focus_distance=doc.get("focus_distance", DEFAULT_FOCUS_DISTANCE),
        name=doc.get("name", ""),
    )


def load_prescription(path) -> LensPrescription:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PrescriptionError(f"{path}: not valid JSON ({exc})") from None
    return prescription_from_dict(doc)


def bundled_prescription(name: str = "double_gauss") -> LensPrescription:
    """Load one of the prescriptions shipped in ``aberrasim/data``."""
    text = resources.files("aberrasim.data").joinpath(f"{name}.json").read_text()
    return prescription_from_dict(json.loads(text))
