"""Surface description and sag evaluation.

Sag follows the even asphere form

    z(s) = c s^2 / (1 + sqrt(1 - c^2 s^2)) + sum_j M_j s^j,   j even, 2 <= j <= 12

with ``s`` the radial distance from the optical axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import PrescriptionError, SurfaceDomainError

SURFACE_KINDS = ("spherical", "aspheric", "stop", "image-plane")
MAX_ASPHERIC_ORDER = 12


@dataclass(frozen=True)
class Surface:
    kind: str
    curvature: float = 0.0
    aspheric: Mapping[int, float] = field(default_factory=dict)
    semi_diameter: float = np.inf
    thickness: float = 0.0
    index: Mapping[float, float] = field(default_factory=lambda: {587.6: 1.0})

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise PrescriptionError(f"unknown surface type {self.kind!r}")
        coeffs = {int(k): float(v) for k, v in dict(self.aspheric).items()}
        for order in coeffs:
            if order < 2 or order % 2 or order > MAX_ASPHERIC_ORDER:
                raise PrescriptionError(
                    f"aspheric order {order} not an even integer in [2, {MAX_ASPHERIC_ORDER}]")
        if self.kind == "spherical" and any(coeffs.values()):
            raise PrescriptionError("spherical surface carries aspheric coefficients")
        if self.kind in ("stop", "image-plane") and (self.curvature or any(coeffs.values())):
            raise PrescriptionError(f"{self.kind} surface must be planar")
        if not self.semi_diameter > 0:
            raise PrescriptionError("semi_diameter must be positive")
        table = {float(k): float(v) for k, v in dict(self.index).items()}
        if not table:
            raise PrescriptionError("index table is empty")
        if any(not v > 0 for v in table.values()):
            raise PrescriptionError("refractive index must be positive")
        object.__setattr__(self, "aspheric", coeffs)
        object.__setattr__(self, "index", dict(sorted(table.items())))

    @property
    def is_aspheric(self) -> bool:
        return any(self.aspheric.values())

    @property
    def refracts(self) -> bool:
        return self.kind in ("spherical", "aspheric")

    def index_at(self, wavelength_nm):
        """Refractive index after this surface, linearly interpolated in wavelength.

        Wavelengths outside the table are clamped to the nearest entry.
        """
        lam = np.fromiter(self.index.keys(), float)
        n = np.fromiter(self.index.values(), float)
        if lam.size == 1:
            return np.full(np.shape(wavelength_nm), n[0])[()]
        return np.interp(wavelength_nm, lam, n)


def sag(surface: Surface, s, check: bool = True):
    """Surface height z at radial distance ``s`` (mm), relative to the vertex."""
    s = np.asarray(s, dtype=float)
    c = surface.curvature
    s2 = s * s
    arg = 1.0 - c * c * s2
    if check and np.any(arg <= 0):
        raise SurfaceDomainError("c^2 s^2 >= 1: radial distance beyond the hemispheric limit")
    z = c * s2 / (1.0 + np.sqrt(np.maximum(arg, 0.0)))
    for order, coef in surface.aspheric.items():
        z = z + coef * s2 ** (order // 2)
    return z[()] if z.ndim == 0 else z


def sag_slope(surface: Surface, s):
    """dz/ds, evaluated without domain checks (callers mask invalid rays)."""
    s = np.asarray(s, dtype=float)
    c = surface.curvature
    arg = np.maximum(1.0 - c * c * s * s, 1e-300)
    dz = c * s / np.sqrt(arg)
    for order, coef in surface.aspheric.items():
        dz = dz + order * coef * s ** (order - 1)
    return dz


def sag_slope_over_s(surface: Surface, s):
    """(dz/ds)/s, finite at s = 0; used for normals and Newton steps."""
    s = np.asarray(s, dtype=float)
    c = surface.curvature
    arg = np.maximum(1.0 - c * c * s * s, 1e-300)
    g = c / np.sqrt(arg)
    for order, coef in surface.aspheric.items():
        g = g + order * coef * s ** (order - 2)
    return g
