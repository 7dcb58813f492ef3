"""Chief-ray search: the ray from a field point through the centre of the stop."""
from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError
from .paraxial import first_order
from .prescription import LensPrescription
from .raytrace import Ray, _run, _steps_forward

CHIEF_TOL = 1e-10
CHIEF_MAX_ITER = 50


def _stop_hits(p, origins, tans, wavelength, steps):
    D = np.column_stack([tans, np.ones(len(tans))])
    bt = _run(steps, origins, D, 0.0, record=False, clip_apertures=False)
    xy = bt.position[:, :2].copy()
    xy[~bt.valid] = np.nan
    return xy


def find_chief_rays(p: LensPrescription, field_points, wavelength: float,
                    tol: float = CHIEF_TOL, max_iter: int = CHIEF_MAX_ITER):
    """Launch direction tangents (dx/dz, dy/dz) of the chief ray for each object point.

    Solves stop_hit(a, b) = (0, 0) with a 2-D secant (finite-difference
    Newton) iteration seeded by the paraxial entrance-pupil aim. Apertures
    are ignored during the search. Returns ``(tans, residual)`` where
    ``residual`` is the stop-plane miss distance in mm.
    """
    O = np.atleast_2d(np.asarray(field_points, dtype=float))
    fo = first_order(p, wavelength)
    steps = _steps_forward(p, wavelength)[: p.stop_index + 1]
    tans = -O[:, :2] / (fo.entrance_pupil_z - O[:, 2])[:, None]
    h = 1e-7
    resid = np.full(len(O), np.inf)
    for _ in range(max_iter):
        r = _stop_hits(p, O, tans, wavelength, steps)
        resid = np.hypot(r[:, 0], r[:, 1])
        todo = ~(resid < tol)
        if not todo.any():
            break
        idx = np.nonzero(todo)[0]
        t0 = tans[idx]
        ra = _stop_hits(p, O[idx], t0 + [h, 0.0], wavelength, steps)
        rb = _stop_hits(p, O[idx], t0 + [0.0, h], wavelength, steps)
        J = np.stack([(ra - r[idx]) / h, (rb - r[idx]) / h], axis=2)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        ok = np.isfinite(det) & (np.abs(det) > 1e-300)
        rr = r[idx]
        da = np.where(ok, (J[:, 1, 1] * rr[:, 0] - J[:, 0, 1] * rr[:, 1]) / np.where(ok, det, 1), 0)
        db = np.where(ok, (-J[:, 1, 0] * rr[:, 0] + J[:, 0, 0] * rr[:, 1]) / np.where(ok, det, 1), 0)
        tans[idx] = t0 - np.column_stack([da, db])
    return tans, resid


def find_chief_ray(p: LensPrescription, field, wavelength: float) -> Ray:
    """Chief ray from object point ``field`` (x, y, z in mm)."""
    O = np.asarray(field, dtype=float).reshape(1, 3)
    tans, resid = find_chief_rays(p, O, wavelength)
    if not resid[0] < 1e-8:
        raise ConvergenceError(f"chief ray did not converge (stop miss {resid[0]:.3g} mm)")
    return Ray(O[0], [tans[0, 0], tans[0, 1], 1.0])
