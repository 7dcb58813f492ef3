"""First-order (paraxial) optics with 2x2 reduced-angle transfer matrices.

Rays are column vectors (y, n*u). Used for pupil locations, focusing and
mapping sensor positions to object-space field points; the real trace
handles everything else.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prescription import LensPrescription


def _translate(d, n):
    return np.array([[1.0, d / n], [0.0, 1.0]])


def _refract(power):
    return np.array([[1.0, 0.0], [-power, 1.0]])


def _power(p: LensPrescription, i: int, n_before: float, n_after: float) -> float:
    s = p.surfaces[i]
    if not s.refracts:
        return 0.0
    c = s.curvature + 2.0 * s.aspheric.get(2, 0.0)
    return (n_after - n_before) * c


def segment_matrix(p: LensPrescription, wavelength: float, start: int, stop: int) -> np.ndarray:
    """Matrix from just before surface ``start`` to just after surface ``stop`` (both at vertices)."""
    n = p.indices(wavelength)
    n_before = np.concatenate([[p.object_index], n[:-1]])
    M = np.eye(2)
    for i in range(start, stop + 1):
        if i > start:
            M = _translate(p.surfaces[i - 1].thickness, n_before[i]) @ M
        M = _refract(_power(p, i, n_before[i], n[i])) @ M
    return M


@dataclass(frozen=True)
class FirstOrder:
    efl: float
    entrance_pupil_z: float
    entrance_pupil_radius: float
    exit_pupil_z: float
    exit_pupil_radius: float
    image_index: float
    object_index: float


def first_order(p: LensPrescription, wavelength: float) -> FirstOrder:
    n = p.indices(wavelength)
    n0, n_img = p.object_index, n[-1]
    last = len(p.surfaces) - 2
    r_stop = p.surfaces[p.stop_index].semi_diameter
    z = p.vertex_z

    sysM = segment_matrix(p, wavelength, 0, last)
    C = sysM[1, 0]
    efl = -1.0 / C if C else np.inf

    if p.stop_index == 0:
        z_ep, r_ep = 0.0, r_stop
    else:
        F = segment_matrix(p, wavelength, 0, p.stop_index)
        # transfer from object-space plane z to the stop: conjugate when B = 0
        z_ep = F[0, 1] * n0 / F[0, 0]
        r_ep = r_stop / abs(F[0, 0])

    if p.stop_index >= last:
        z_xp, r_xp = z[p.stop_index], r_stop
    else:
        B = segment_matrix(p, wavelength, p.stop_index + 1, last)
        B = B @ _translate(p.surfaces[p.stop_index].thickness, n[p.stop_index])
        d = -B[0, 1] * n_img / B[1, 1]
        mag = B[0, 0] + d * B[1, 0] / n_img
        z_xp, r_xp = z[last] + d, r_stop * abs(mag)
    return FirstOrder(efl, z_ep, r_ep, z_xp, r_xp, n_img, n0)


def image_distance(p: LensPrescription, object_distance: float, wavelength: float) -> float:
    """Paraxial image position, measured from the last refracting vertex."""
    last = len(p.surfaces) - 2
    n_img = p.indices(wavelength)[-1]
    M = segment_matrix(p, wavelength, 0, last) @ _translate(object_distance, p.object_index)
    return -M[0, 1] * n_img / M[1, 1]


def image_plane_matrix(p: LensPrescription, wavelength: float) -> np.ndarray:
    """Matrix from the first vertex plane (object side) to the image plane."""
    last = len(p.surfaces) - 2
    n_img = p.indices(wavelength)[-1]
    return _translate(p.surfaces[last].thickness, n_img) @ segment_matrix(p, wavelength, 0, last)


def chief_magnification(p: LensPrescription, object_distance: float, wavelength: float) -> float:
    """Image height per unit object height of the paraxial chief ray on the image plane.

    The object sits ``object_distance`` mm in front of the first vertex; the
    chief ray is aimed at the entrance pupil centre.
    """
    fo = first_order(p, wavelength)
    z_obj = -object_distance
    u = -1.0 / (fo.entrance_pupil_z - z_obj)
    y0 = 1.0 + u * (0.0 - z_obj)
    M = image_plane_matrix(p, wavelength)
    return M[0, 0] * y0 + M[0, 1] * p.object_index * u
