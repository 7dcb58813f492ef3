"""Sequential geometric ray tracing.

Everything here works on batches: positions and directions are ``(M, 3)``
arrays and failures are reported through boolean masks, so a vignetted or
totally reflected ray never aborts the rest of the batch. The single-ray
functions wrap the batch versions and raise instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import AberrasimError, ConvergenceError
from .prescription import LensPrescription
from .surfaces import Surface, sag, sag_slope_over_s

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50

# clip codes stored in BatchTrace.failure
OK, MISSED, CLIPPED, TIR = 0, 1, 2, 3


class RayFailure(AberrasimError):
    pass


class RayMissed(RayFailure):
    pass


class RayVignetted(RayFailure):
    pass


class TotalInternalReflection(RayFailure):
    pass


@dataclass
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    opl: float = 0.0

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        self.direction = d / np.linalg.norm(d)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass
class TraceResult:
    hit_points: list
    exit_direction: np.ndarray
    opl: float
    vignetted: bool = False
    clip_surface: int | None = None
    reason: str = ""


@dataclass
class BatchTrace:
    """Final state of a traced batch.

    ``position`` is the last intersection: the image plane for rays that
    made it, the point where the ray was lost otherwise. ``failure`` holds one of OK/MISSED/CLIPPED/TIR and
    ``clip_surface`` the surface index where the ray was lost (-1 if none).
    """

    position: np.ndarray
    direction: np.ndarray
    opl: np.ndarray
    failure: np.ndarray
    clip_surface: np.ndarray
    hits: np.ndarray | None = field(default=None, repr=False)

    @property
    def valid(self) -> np.ndarray:
        return self.failure == OK


# ---------------------------------------------------------------- intersection

def _sphere_t(P, D, c):
    """Near-vertex root of the sphere/plane equation in vertex-local coordinates.

    Returns (t, ok). Uses the form t = C / (-(h + sign(h) sqrt(h^2 - cC))),
    which degrades gracefully to the plane solution as c -> 0.
    """
    h = c * np.einsum("ij,ij->i", P, D) - D[:, 2]
    C = c * np.einsum("ij,ij->i", P, P) - 2.0 * P[:, 2]
    disc = h * h - c * C
    ok = disc >= 0
    root = np.sqrt(np.where(ok, disc, 0.0))
    sgn = np.where(h >= 0, 1.0, -1.0)
    den = -(h + sgn * root)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(den != 0, C / den, np.inf)
    ok &= np.isfinite(t)
    return t, ok


def _asphere_residual(surface, P, D, t):
    X = P + t[:, None] * D
    s2 = X[:, 0] ** 2 + X[:, 1] ** 2
    c = surface.curvature
    arg = 1.0 - c * c * s2
    z = c * s2 / (1.0 + np.sqrt(np.maximum(arg, 0.0)))
    for order, coef in surface.aspheric.items():
        z = z + coef * s2 ** (order // 2)
    return X, X[:, 2] - z, arg > 0


def _asphere_t(surface, P, D, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Newton iteration on z_ray(t) - sag(s(t)) seeded at the spherical root.

    Rays that fail to converge fall back to bisection over the axial band
    the surface can occupy inside its semi-diameter.
    """
    t, ok = _sphere_t(P, D, surface.curvature)
    plane_t = -P[:, 2] / D[:, 2]
    t = np.where(ok, t, plane_t)
    done = np.zeros(len(t), dtype=bool)
    for _ in range(max_iter):
        X, f, inside = _asphere_residual(surface, P, D, t)
        done = inside & (np.abs(f) < tol)
        if done.all():
            break
        s = np.hypot(X[:, 0], X[:, 1])
        g = sag_slope_over_s(surface, s)
        df = D[:, 2] - g * (X[:, 0] * D[:, 0] + X[:, 1] * D[:, 1])
        step = np.where(np.abs(df) > 1e-14, f / np.where(df == 0, 1.0, df), 0.0)
        t = np.where(done, t, t - step)
    pending = ~done
    if pending.any():
        t[pending], done[pending] = _asphere_bisect(surface, P[pending], D[pending], tol)
    return t, done


def _asphere_bisect(surface, P, D, tol):
    rim = surface.semi_diameter if np.isfinite(surface.semi_diameter) else 1e3
    limit = 1.0 / abs(surface.curvature) if surface.curvature else np.inf
    s = np.linspace(0.0, min(rim, 0.999999 * limit), 257)
    z = sag(surface, s, check=False)
    zmin, zmax = z.min(), z.max()
    pad = 1e-6 + 1e-3 * (zmax - zmin)
    dz = np.where(np.abs(D[:, 2]) < 1e-14, 1e-14, D[:, 2])
    ta = (zmin - pad - P[:, 2]) / dz
    tb = (zmax + pad - P[:, 2]) / dz
    lo, hi = np.minimum(ta, tb), np.maximum(ta, tb)
    _, flo, _ = _asphere_residual(surface, P, D, lo)
    _, fhi, _ = _asphere_residual(surface, P, D, hi)
    ok = np.sign(flo) != np.sign(fhi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, fm, _ = _asphere_residual(surface, P, D, mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
        if np.all(np.abs(fm[ok]) < tol) or np.all(hi - lo < 1e-15):
            break
    t = 0.5 * (lo + hi)
    _, f, inside = _asphere_residual(surface, P, D, t)
    return t, ok & inside & (np.abs(f) < tol)


def surface_normal(surface: Surface, X):
    """Unit normals (pointing toward +z) at vertex-local points ``X``."""
    s = np.hypot(X[:, 0], X[:, 1])
    g = sag_slope_over_s(surface, s)
    N = np.stack([-X[:, 0] * g, -X[:, 1] * g, np.ones(len(X))], axis=1)
    return N / np.linalg.norm(N, axis=1, keepdims=True)


def _refract_v(D, N, n1, n2):
    cos_i = np.einsum("ij,ij->i", D, N)
    N = np.where(cos_i[:, None] < 0, -N, N)
    cos_i = np.abs(cos_i)
    mu = n1 / n2
    k = 1.0 - mu * mu * (1.0 - cos_i * cos_i)
    ok = k >= 0
    Dp = mu[:, None] * D + (np.sqrt(np.where(ok, k, 0.0)) - mu * cos_i)[:, None] * N
    Dp /= np.linalg.norm(Dp, axis=1, keepdims=True)
    return Dp, ok


# ---------------------------------------------------------------- single-ray API

def _as_batch(ray: Ray, vertex_z: float):
    P = ray.origin[None, :] - np.array([[0.0, 0.0, vertex_z]])
    return P, ray.direction[None, :]


def intersect_sphere(ray: Ray, surface: Surface, vertex_z: float = 0.0) -> float:
    """Ray parameter t >= 0 of the intersection with a spherical or planar surface."""
    P, D = _as_batch(ray, vertex_z)
    t, ok = _sphere_t(P, D, surface.curvature)
    if not ok[0] or t[0] < -1e-12:
        raise RayMissed("ray misses the surface")
    X = P[0] + t[0] * D[0]
    if np.hypot(X[0], X[1]) > surface.semi_diameter:
        raise RayVignetted("intersection outside the clear aperture")
    return float(max(t[0], 0.0))


def intersect_asphere(ray: Ray, surface: Surface, vertex_z: float = 0.0) -> float:
    """Ray parameter of the intersection with an even asphere (Newton, bisection fallback)."""
    P, D = _as_batch(ray, vertex_z)
    t, ok = _asphere_t(surface, P, D)
    if not ok[0]:
        raise ConvergenceError("asphere intersection did not converge")
    if t[0] < -1e-12:
        raise RayMissed("surface lies behind the ray origin")
    X = P[0] + t[0] * D[0]
    if np.hypot(X[0], X[1]) > surface.semi_diameter:
        raise RayVignetted("intersection outside the clear aperture")
    return float(max(t[0], 0.0))


def refract(direction, normal, n1: float, n2: float) -> np.ndarray:
    """Refracted unit direction by the vector form of Snell's law.

    The normal may point either way; it is oriented along the incident ray.
    Raises TotalInternalReflection when no transmitted ray exists.
    """
    D = np.asarray(direction, dtype=float).reshape(1, 3)
    N = np.asarray(normal, dtype=float).reshape(1, 3)
    out, ok = _refract_v(D, N, np.array([float(n1)]), np.array([float(n2)]))
    if not ok[0]:
        raise TotalInternalReflection("total internal reflection")
    return out[0]


# ---------------------------------------------------------------- batch tracing

def _steps_forward(p: LensPrescription, wavelength):
    n_after = _indices(p, wavelength)
    n_before = np.concatenate([np.full((1,) + n_after.shape[1:], p.object_index), n_after[:-1]])
    return [(i, p.surfaces[i], p.vertex_z[i], n_before[i], n_after[i], 1.0)
            for i in range(len(p.surfaces))]


def _steps_backward(p: LensPrescription, wavelength):
    n_after = _indices(p, wavelength)
    n_before = np.concatenate([np.full((1,) + n_after.shape[1:], p.object_index), n_after[:-1]])
    return [(i, p.surfaces[i], p.vertex_z[i], n_after[i], n_before[i], -1.0)
            for i in range(len(p.surfaces) - 2, -1, -1)]


def _indices(p: LensPrescription, wavelength):
    lam = np.asarray(wavelength, dtype=float)
    return np.stack([np.broadcast_to(np.asarray(s.index_at(lam), float), lam.shape)
                     for s in p.surfaces])


def _run(steps, origins, directions, opl0, record, clip_apertures=True):
    P = np.array(origins, dtype=float, copy=True).reshape(-1, 3)
    D = np.array(directions, dtype=float, copy=True).reshape(-1, 3)
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    M = len(P)
    opl = np.broadcast_to(np.asarray(opl0, dtype=float), (M,)).copy()
    failure = np.zeros(M, dtype=np.int8)
    clip = np.full(M, -1, dtype=np.int64)
    hits = np.full((M, len(steps), 3), np.nan) if record else None

    # component arrays over the currently tracked subset ``idx``
    idx = np.arange(M)
    px, py, pz = (P[:, k].copy() for k in range(3))
    dx, dy, dz = (D[:, k].copy() for k in range(3))
    acc = opl.copy()
    with np.errstate(all="ignore"):
        for k, (i, surf, vz, n1, n2, _sense) in enumerate(steps):
            if idx.size == 0:
                break
            n1v = np.broadcast_to(n1, (M,))[idx] if np.ndim(n1) else float(n1)
            n2v = np.broadcast_to(n2, (M,))[idx] if np.ndim(n2) else float(n2)
            lz = pz - vz
            c = surf.curvature
            if surf.is_aspheric:
                Pl = np.column_stack([px, py, lz])
                Dl = np.column_stack([dx, dy, dz])
                t, ok = _asphere_t(surf, Pl, Dl)
            else:
                h = c * (px * dx + py * dy + lz * dz) - dz
                C = c * (px * px + py * py + lz * lz) - 2.0 * lz
                disc = h * h - c * C
                ok = disc >= 0
                den = -(h + np.copysign(np.sqrt(disc), h))
                t = C / den
                ok &= np.isfinite(t)
            ok &= t >= -1e-9
            t = np.where(ok, np.maximum(t, 0.0), 0.0)
            x = px + t * dx
            y = py + t * dy
            z = lz + t * dz
            s2 = x * x + y * y
            good = ok
            if clip_apertures and np.isfinite(surf.semi_diameter):
                inside = s2 <= surf.semi_diameter ** 2
                good = ok & inside
            else:
                inside = np.ones_like(ok)
            if surf.refracts:
                g = sag_slope_over_s(surf, np.sqrt(s2))
                nx, ny = -x * g, -y * g
                inv = 1.0 / np.sqrt(nx * nx + ny * ny + 1.0)
                nx, ny, nz = nx * inv, ny * inv, inv
                cos_i = dx * nx + dy * ny + dz * nz
                flip = np.where(cos_i < 0, -1.0, 1.0)
                cos_i = cos_i * flip
                mu = n1v / n2v
                kk = 1.0 - mu * mu * (1.0 - cos_i * cos_i)
                tir_ok = kk >= 0
                a = (np.sqrt(kk) - mu * cos_i) * flip
                ndx = mu * dx + a * nx
                ndy = mu * dy + a * ny
                ndz = mu * dz + a * nz
                inv = 1.0 / np.sqrt(ndx * ndx + ndy * ndy + ndz * ndz)
                ndx, ndy, ndz = ndx * inv, ndy * inv, ndz * inv
                good = good & tir_ok
            else:
                tir_ok = None
                ndx, ndy, ndz = dx, dy, dz
            acc = acc + (n1v * t)
            px, py, pz = x, y, z + vz
            dx, dy, dz = ndx, ndy, ndz
            if record:
                hits[idx, k, 0], hits[idx, k, 1], hits[idx, k, 2] = px, py, pz
            if not good.all():
                bad = ~good
                code = np.where(~ok, MISSED, np.where(~inside, CLIPPED, TIR)).astype(np.int8)
                lost = idx[bad]
                P[lost, 0], P[lost, 1], P[lost, 2] = px[bad], py[bad], pz[bad]
                D[lost, 0], D[lost, 1], D[lost, 2] = dx[bad], dy[bad], dz[bad]
                failure[lost] = code[bad]
                clip[lost] = i
                if record:
                    hits[lost, k] = np.nan
                keep = good
                idx = idx[keep]
                px, py, pz, dx, dy, dz, acc = (a_[keep] for a_ in (px, py, pz, dx, dy, dz, acc))
        P[idx, 0], P[idx, 1], P[idx, 2] = px, py, pz
        D[idx, 0], D[idx, 1], D[idx, 2] = dx, dy, dz
        opl[idx] = acc
    return BatchTrace(P, D, opl, failure, clip, hits)


def trace_rays(prescription: LensPrescription, origins, directions, wavelength,
               opl0=0.0, record: bool = False) -> BatchTrace:
    """Trace a batch from object space through every surface to the image plane.

    ``wavelength`` (nm) may be a scalar or one value per ray.
    """
    return _run(_steps_forward(prescription, wavelength), origins, directions, opl0, record)


def trace_rays_backward(prescription: LensPrescription, origins, directions, wavelength,
                        opl0=0.0, record: bool = False) -> BatchTrace:
    """Trace image-space rays travelling toward -z back through the lens.

    Surfaces are visited from the last refracting surface down to the first;
    the image plane itself is skipped.
    """
    return _run(_steps_backward(prescription, wavelength), origins, directions, opl0, record)


def trace_ray(prescription: LensPrescription, ray: Ray, wavelength: float) -> TraceResult:
    bt = trace_rays(prescription, ray.origin, ray.direction, wavelength, ray.opl, record=True)
    hits = [h for h in bt.hits[0] if np.all(np.isfinite(h))]
    reason = {OK: "", MISSED: "missed", CLIPPED: "clipped", TIR: "tir"}[int(bt.failure[0])]
    clip = int(bt.clip_surface[0])
    return TraceResult(hits, bt.direction[0].copy(), float(bt.opl[0]),
                       vignetted=bool(bt.failure[0] != OK),
                       clip_surface=None if clip < 0 else clip, reason=reason)
