"""Sequential geometric ray tracing through a lens prescription."""
from .chief import find_chief_ray, find_chief_rays
from .paraxial import first_order, image_distance
from .prescription import (LensPrescription, Wavelength, bundled_prescription,
                           load_prescription, prescription_from_dict)
from .raytrace import (BatchTrace, Ray, RayFailure, RayMissed, RayVignetted,
                       TotalInternalReflection, TraceResult, intersect_asphere,
                       intersect_sphere, refract, trace_ray, trace_rays, trace_rays_backward)
from .surfaces import Surface, sag, sag_slope

__all__ = [
    "BatchTrace", "LensPrescription", "Ray", "RayFailure", "RayMissed", "RayVignetted",
    "Surface", "TotalInternalReflection", "TraceResult", "Wavelength", "bundled_prescription",
    "find_chief_ray", "find_chief_rays", "first_order", "image_distance", "intersect_asphere",
    "intersect_sphere", "load_prescription", "prescription_from_dict", "refract", "sag",
    "sag_slope", "trace_ray", "trace_rays", "trace_rays_backward",
]
