"""
Best-focus search versus aperture diameter.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.analysis.metrics import chief_ray_magnification, ncc, resample_template, sharpness
from src.core.grid import Grid2D, IntensityMap
from src.optics.crystal import CrystalParams, ring_position
from src.optics.modes import PumpSpec, pump_intensity
from src.optics.propagation import (
    Aperture,
    ApertureSpec,
    FarField,
    FreeSpace,
    Lens,
    OpticalTrain,
)
from src.spdc.biphoton import IdlerSampling, build_biphoton, chief_ray_carrier, marginal_image
from src.utils.logging_config import logger

# Fraction of the peak metric that bounds the depth of focus
FOCUS_LEVEL = 0.9


@dataclass
class FocusScanResult:
    aperture_diameter_m: float
    z1_samples: List[float]
    metric_curve: List[Tuple[float, float]]
    best_z1: float
    depth_of_focus: float
    sharpness_curve: List[Tuple[float, float]] = field(default_factory=list)
    images: List[IntensityMap] = field(default_factory=list, repr=False)


def depth_of_focus(z1: Sequence[float], metric: Sequence[float], level: float = FOCUS_LEVEL) -> Tuple[float, float]:
    """
    Best plane and the extent of the contiguous run around it where
    metric ≥ level·max.

    Returns:
        (best_z1, width)
    """
    metric = np.asarray(metric, dtype=float)
    best = int(np.argmax(metric))
    cut = level * metric[best]
    lo = best
    while lo > 0 and metric[lo - 1] >= cut:
        lo -= 1
    hi = best
    while hi < len(metric) - 1 and metric[hi + 1] >= cut:
        hi += 1
    return float(z1[best]), float(z1[hi] - z1[lo])


def imaging_train(
    z0_m: float,
    focal_m: float,
    z1_m: float,
    aperture: Optional[ApertureSpec],
    physical: bool = False
) -> OpticalTrain:
    """
    Crystal → aperture plane at z0 → lens one focal length behind → plane z1.

    Args:
        physical: Use Fresnel free space to the aperture instead of the far-field stage
    """
    first = FreeSpace(distance_m=z0_m) if physical else FarField(distance_m=z0_m)
    elements = [first]
    if aperture is not None:
        elements.append(Aperture(spec=aperture))
    elements += [FreeSpace(distance_m=focal_m), Lens(focal_m=focal_m), FreeSpace(distance_m=z1_m)]
    return OpticalTrain(elements=tuple(elements))


def pump_template(pump: PumpSpec, grid: Grid2D, train: OpticalTrain, target_grid: Grid2D) -> IntensityMap:
    """Pump intensity scaled by the chief-ray magnification of `train`."""
    source = IntensityMap(grid, pump_intensity(pump, grid))
    return resample_template(source, chief_ray_magnification(train), target_grid)


def focus_scan(
    pump: PumpSpec,
    crystal: CrystalParams,
    aperture_diameters: Sequence[float],
    z1_range: Sequence[float],
    grid: Grid2D,
    idler_sampling: IdlerSampling = None,
    z0_m: float = 0.05,
    focal_m: float = 0.10,
    aperture_angle_rad: float = np.pi / 2,
    method: Literal["otf", "scaled"] = "scaled",
    mismatch_phase: bool = True,
    workers: Optional[int] = None,
    keep_images: bool = False,
    progress: Optional[Callable[[float, float, float], None]] = None
) -> List[FocusScanResult]:
    """
    Marginal image versus detector distance z1 for each aperture diameter.

    The metric at each plane is the NCC against the pump template scaled
    by the chief-ray magnification; the variance-of-Laplacian sharpness is
    recorded alongside.

    Args:
        pump: Pump superposition
        crystal: Crystal parameters
        aperture_diameters: Diameters in meters
        z1_range: Lens-to-detector distances in meters
        grid: Crystal-plane position grid
        idler_sampling: Idler quadrature
        z0_m: Crystal-to-aperture distance
        focal_m: Lens focal length (lens sits one focal length behind the aperture)
        aperture_angle_rad: Azimuth of the aperture on the emission ring

    Returns:
        One FocusScanResult per diameter, in input order
    """
    centre = ring_position(crystal, z0_m, aperture_angle_rad)
    first_train = imaging_train(z0_m, focal_m, z1_range[0], ApertureSpec(diameter_m=aperture_diameters[0], center=centre))
    carrier = chief_ray_carrier(first_train, crystal)
    bi = build_biphoton(pump, crystal, grid, idler_sampling, carrier, mismatch_phase)

    results = []
    for diameter in aperture_diameters:
        aperture = ApertureSpec(diameter_m=diameter, center=centre)
        curve, sharp, images = [], [], []
        for z1 in z1_range:
            train = imaging_train(z0_m, focal_m, z1, aperture)
            image = marginal_image(bi, train, method, workers=workers)
            template = pump_template(pump, grid, train, image.grid)
            score = ncc(image, template)
            curve.append((float(z1), score))
            sharp.append((float(z1), sharpness(image)))
            if keep_images:
                images.append(image)
            if progress:
                progress(diameter, z1, score)

        best, dof = depth_of_focus([z for z, _ in curve], [m for _, m in curve])
        logger.info(
            f"Focus scan d={diameter * 1e6:.1f} um: best z1={best * 100:.1f} cm, "
            f"depth of focus={dof * 100:.1f} cm"
        )
        results.append(FocusScanResult(
            aperture_diameter_m=float(diameter),
            z1_samples=[float(z) for z in z1_range],
            metric_curve=curve,
            best_z1=best,
            depth_of_focus=dof,
            sharpness_curve=sharp,
            images=images,
        ))
    return results
