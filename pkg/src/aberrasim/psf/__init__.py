"""Exit-pupil wavefronts, diffraction PSFs and field-dependent PSF grids."""
from .diffraction import PSFKernel, amplitude_spread, image_sampling, psf_from_asf
from .grid import GRID_SIZE, PSFGrid, patch_centers, psf_grid
from .io import kernel_mosaic, read_psfg, write_mosaic_png, write_psfg
from .pupil import (PupilMap, object_point, pupil_function, relative_illuminance,
                    sample_exit_pupil, sample_exit_pupils)

__all__ = [
    "GRID_SIZE", "PSFGrid", "PSFKernel", "PupilMap", "amplitude_spread", "image_sampling",
    "kernel_mosaic", "object_point", "patch_centers", "psf_from_asf", "psf_grid",
    "pupil_function", "read_psfg", "relative_illuminance", "sample_exit_pupil",
    "sample_exit_pupils", "write_mosaic_png", "write_psfg",
]
