"""Exit-pupil sampling: OPD maps, vignetting masks and relative illuminance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, ValidationError
from ..optics.chief import find_chief_rays
from ..optics.paraxial import first_order
from ..optics.prescription import LensPrescription
from ..optics.raytrace import trace_rays

DEFAULT_PUPIL_N = 128


@dataclass
class PupilMap:
    """Sampled exit pupil of one field point at one wavelength.

    ``opd`` is in mm (zero where vignetted), ``amplitude`` is the 0/1
    transmission mask. ``spacing`` is the exit-pupil sample pitch and
    ``ref_radius`` the reference-sphere radius, both in mm, which together
    fix the image-plane sampling of the diffraction integral.
    """

    n: int
    opd: np.ndarray
    amplitude: np.ndarray
    wavelength: float
    spacing: float
    ref_radius: float
    image_index: float = 1.0
    chief_image: np.ndarray | None = None
    chief_angle: float = 0.0

    @property
    def transmitted_fraction(self) -> float:
        return float(self.amplitude.mean())


def object_point(p: LensPrescription, field_xy, d: float) -> np.ndarray:
    """Object point for lateral position ``field_xy`` (mm) on the plane at defocus ``d``."""
    x, y = np.asarray(field_xy, dtype=float).reshape(2)
    return np.array([x, y, -(p.focus_distance + d)])


def _pupil_grid(n):
    g = (np.arange(n) - n / 2 + 0.5) / (n / 2)
    return np.meshgrid(g, g)


def sample_exit_pupils(p: LensPrescription, objects, wavelength: float,
                       n: int = DEFAULT_PUPIL_N) -> list[PupilMap]:
    """Pupil maps for a batch of object points (F, 3), traced together.

    Rays are aimed at a square grid spanning the paraxial entrance pupil,
    centred on each field's real chief ray. Each ray is traced to the image
    plane and then back along its final direction to the reference sphere,
    which is centred on the chief ray's image point and passes through the
    exit pupil. The OPD is the difference between a ray's path length to
    that sphere and the chief ray's.
    """
    if n <= 0 or n % 2:
        raise ValidationError("pupil sampling n must be a positive even integer")
    O = np.atleast_2d(np.asarray(objects, dtype=float))
    F = len(O)
    fo = first_order(p, wavelength)
    tans, resid = find_chief_rays(p, O, wavelength)
    bad = ~(resid < 1e-8)
    if bad.any():
        i = int(np.argmax(bad))
        raise ConvergenceError(f"chief ray failed for field {O[i, :2]} (stop miss {resid[i]:.3g} mm)")
    chief = trace_rays(p, O, np.column_stack([tans, np.ones(F)]), wavelength)
    if not chief.valid.all():
        i = int(np.argmin(chief.valid))
        raise ConvergenceError(f"chief ray vignetted for field {O[i, :2]}")
    Pc, Dc, opl_c = chief.position, chief.direction, chief.opl

    n_img = fo.image_index
    E = Pc + Dc * ((fo.exit_pupil_z - Pc[:, 2]) / Dc[:, 2])[:, None]
    R = np.linalg.norm(Pc - E, axis=1)

    centre = O[:, :2] + tans * (fo.entrance_pupil_z - O[:, 2])[:, None]
    gx, gy = _pupil_grid(n)
    r_ep = fo.entrance_pupil_radius
    targets = np.empty((F, n * n, 3))
    targets[..., 0] = centre[:, :1] + r_ep * gx.ravel()
    targets[..., 1] = centre[:, 1:] + r_ep * gy.ravel()
    targets[..., 2] = fo.entrance_pupil_z
    D = (targets - O[:, None, :]).reshape(-1, 3)
    origins = np.repeat(O, n * n, axis=0)
    bt = trace_rays(p, origins, D, wavelength)

    ok = bt.valid.reshape(F, n * n)
    w = bt.position.reshape(F, n * n, 3) - Pc[:, None, :]
    dirs = bt.direction.reshape(F, n * n, 3)
    wd = np.einsum("fij,fij->fi", w, dirs)
    disc = wd * wd - np.einsum("fij,fij->fi", w, w) + (R * R)[:, None]
    ok &= disc >= 0
    t = wd + np.sqrt(np.where(ok, disc, 0.0))
    opl_sphere = bt.opl.reshape(F, n * n) - n_img * t
    opd = np.where(ok, opl_sphere - (opl_c - n_img * R)[:, None], 0.0)

    spacing = 2.0 * fo.exit_pupil_radius / n
    angles = np.arctan(np.hypot(tans[:, 0], tans[:, 1]))
    return [PupilMap(n, opd[f].reshape(n, n), ok[f].reshape(n, n).astype(float), float(wavelength),
                     spacing, float(R[f]), float(n_img), Pc[f, :2].copy(), float(angles[f]))
            for f in range(F)]


def sample_exit_pupil(p: LensPrescription, field, d: float, wavelength: float,
                      n: int = DEFAULT_PUPIL_N) -> PupilMap:
    """Trace an n x n pupil grid from one object point and build its OPD map.

    ``field`` is either the lateral object position (x, y) in mm on the
    object plane ``focus_distance + d`` in front of the first vertex, or a
    full (x, y, z) object point.
    """
    O = object_point(p, field, d) if np.size(field) == 2 else np.asarray(field, float)
    return sample_exit_pupils(p, O[None, :], wavelength, n)[0]


def pupil_function(pm: PupilMap) -> np.ndarray:
    """Complex pupil A * exp(j 2 pi / lambda * OPD), lambda converted nm -> mm."""
    lam_mm = pm.wavelength * 1e-6
    return pm.amplitude * np.exp(1j * 2.0 * np.pi / lam_mm * pm.opd)


def relative_illuminance(p: LensPrescription, field, d: float = 0.0, wavelength: float | None = None,
                         n: int = 64, method: str = "rays") -> float:
    """Field brightness relative to the axis, in (0, 1].

    ``method="rays"`` compares the fraction of launched pupil rays that reach
    the image plane with the on-axis fraction; ``method="cos4"`` uses the
    cos^4 law on the chief-ray angle in object space.
    """
    if wavelength is None:
        wavelength = reference_wavelength(p)
    if method == "cos4":
        O = object_point(p, field, d) if np.size(field) == 2 else np.asarray(field, float)
        tans, _ = find_chief_rays(p, O[None, :], wavelength)
        return cos4(float(np.arctan(np.hypot(*tans[0]))))
    if method != "rays":
        raise ValidationError(f"unknown illuminance method {method!r}")
    frac = sample_exit_pupil(p, field, d, wavelength, n).transmitted_fraction
    axis = sample_exit_pupil(p, (0.0, 0.0), d, wavelength, n).transmitted_fraction
    return float(np.clip(frac / axis, 1e-12, 1.0))


def cos4(angle_rad: float) -> float:
    return float(np.cos(angle_rad) ** 4)


def reference_wavelength(p: LensPrescription) -> float:
    """Wavelength closest to the middle of the prescription's band."""
    lams = np.array([w.nm for w in p.wavelengths])
    return float(lams[np.argmin(np.abs(lams - np.median(lams)))])
