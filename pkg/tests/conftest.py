import json
import sys
from pathlib import Path

import numpy as np
import pytest

from aberrasim.optics import bundled_prescription, prescription_from_dict

DATA = Path(__file__).parent / "data"
D_LINE = 587.6


def lens(surfaces, stop_index=0, wavelengths=((D_LINE, "Y", 1.0),), **extra):
    doc = {"surfaces": surfaces, "stop_index": stop_index,
           "wavelengths": [{"nm": nm, "channel": ch, "weight": w} for nm, ch, w in wavelengths]}
    doc.update(extra)
    return prescription_from_dict(doc)


def air(nm=D_LINE):
    return {str(nm): 1.0}


def glass(n, nm=D_LINE):
    return {str(nm): n}


def free_space(length=100.0):
    """A stop at z=0 followed directly by the image plane."""
    return lens([{"type": "stop", "semi_diameter": 50.0, "thickness": length},
                 {"type": "image-plane"}])


def plate(thickness=3.0, n=1.5, gap=10.0, semi=20.0):
    return lens([
        {"type": "stop", "semi_diameter": semi, "thickness": 1.0},
        {"type": "spherical", "curvature": 0.0, "semi_diameter": semi, "thickness": thickness,
         "index": glass(n)},
        {"type": "spherical", "curvature": 0.0, "semi_diameter": semi, "thickness": gap,
         "index": air()},
        {"type": "image-plane"},
    ])


def singlet(stop_radius=2.0, image_gap=None, focus_distance=500.0, wavelengths=((D_LINE, "Y", 1.0),),
            n=1.5168):
    """Stop 5 mm ahead of a biconvex singlet (EFL about 49 mm), image at paraxial focus."""
    idx = {str(nm): n for nm, _, _ in wavelengths}
    surfaces = [
        {"type": "stop", "semi_diameter": stop_radius, "thickness": 5.0},
        {"type": "spherical", "curvature": 0.02, "semi_diameter": 10.0, "thickness": 3.0, "index": idx},
        {"type": "spherical", "curvature": -0.02, "semi_diameter": 10.0, "thickness": 50.0,
         "index": {str(nm): 1.0 for nm, _, _ in wavelengths}},
        {"type": "image-plane"},
    ]
    p = lens(surfaces, 0, wavelengths, focus_distance=focus_distance)
    if image_gap is None:
        from aberrasim.optics.paraxial import image_distance
        image_gap = image_distance(p, focus_distance, wavelengths[0][0])
    surfaces[2]["thickness"] = float(image_gap)
    return lens(surfaces, 0, wavelengths, focus_distance=focus_distance)


def cartesian_oval(L=50.0, L_img=80.0, n=1.5, semi=3.0, stop_radius=2.5, orders=(4, 6, 8, 10, 12)):
    """Single refracting surface imaging the axial point at distance L perfectly.

    The exact Cartesian oval  L + n*L_img = |P - O| + n*|I - P|  is sampled
    and fitted with curvature plus even polynomial terms.
    """
    s = np.linspace(0.0, semi, 200)
    z = np.zeros_like(s)
    const = L + n * L_img
    for i, si in enumerate(s):
        lo, hi = -1.0, 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f = np.hypot(si, mid + L) + n * np.hypot(si, L_img - mid) - const
            if f > 0:  # f decreases with z
                lo = mid
            else:
                hi = mid
        z[i] = 0.5 * (lo + hi)

    c = (1.0 / L + n / L_img) / (n - 1.0)  # paraxial curvature of the oval
    A = np.stack([s ** j for j in orders], axis=1)
    base = c * s ** 2 / (1 + np.sqrt(1 - c ** 2 * s ** 2))
    coef, *_ = np.linalg.lstsq(A, z - base, rcond=None)
    return lens([
        {"type": "stop", "semi_diameter": stop_radius, "thickness": 0.0},
        {"type": "aspheric", "curvature": float(c), "semi_diameter": semi, "thickness": L_img,
         "aspheric": {str(j): float(m) for j, m in zip(orders, coef)}, "index": glass(n)},
        {"type": "image-plane"},
    ], focus_distance=L)


@pytest.fixture(scope="session")
def double_gauss():
    return bundled_prescription()


@pytest.fixture
def plate_path():
    return DATA / "plate.json"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def load_json(path):
    return json.loads(Path(path).read_text())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
