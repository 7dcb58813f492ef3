"""Spatially varying blur synthesis, noise, datasets and image-quality metrics."""
from .convolve import conv_valid, convolve_patchwise, illuminance_map
from .dataset import (DatasetManifest, ManifestEntry, default_distances, generate_dataset,
                      parse_distances)
from .io import list_images, read_image, write_png16
from .metrics import psnr, ssim, ssim_map
from .mtf import MTF50, MTFCurve, mtf50, mtf_from_psf, slanted_edge_mtf, write_mtf_csv
from .noise import NoiseModel, add_noise
from .simulate import GridCache, check_distance, degrade, simulate

__all__ = [
    "DatasetManifest", "GridCache", "MTF50", "MTFCurve", "ManifestEntry", "NoiseModel",
    "add_noise", "check_distance", "conv_valid", "convolve_patchwise", "default_distances",
    "degrade", "generate_dataset", "illuminance_map", "list_images", "mtf50", "mtf_from_psf",
    "parse_distances", "psnr", "read_image", "simulate", "slanted_edge_mtf", "ssim",
    "ssim_map", "write_mtf_csv", "write_png16",
]
