"""
Image comparison metrics and template resampling.
"""

from typing import Dict, Tuple, Union

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from src.core.errors import DegenerateImageError, DomainError
from src.core.grid import Grid2D, IntensityMap
from src.optics.propagation import Aperture, OpticalTrain, ray_transfer_matrix

ImageLike = Union[IntensityMap, np.ndarray]


def _values(img: ImageLike) -> np.ndarray:
    return np.asarray(img.values if isinstance(img, IntensityMap) else img, dtype=np.float64)


def ncc(a: ImageLike, b: ImageLike) -> float:
    """
    Normalized cross-correlation (Pearson coefficient of the pixel vectors).

    Raises:
        DomainError: shapes differ
        DegenerateImageError: either image is constant
    """
    x = _values(a)
    y = _values(b)
    if x.shape != y.shape:
        raise DomainError(f"Cannot correlate images of shape {x.shape} and {y.shape}")

    x = x - x.mean()
    y = y - y.mean()
    sx = np.sqrt(np.sum(x * x))
    sy = np.sqrt(np.sum(y * y))
    if sx == 0 or sy == 0:
        raise DegenerateImageError("Normalized cross-correlation of a constant image")
    return float(np.clip(np.sum(x * y) / (sx * sy), -1.0, 1.0))


def azimuthal_harmonics(
    img: IntensityMap,
    center: Tuple[float, float] = (0.0, 0.0),
    max_order: int = 16,
    angular_samples: int = 256
) -> Dict[int, float]:
    """
    Angular Fourier power of the radially integrated intensity.

    Args:
        img: Intensity image
        center: Expansion centre in grid coordinates
        max_order: Largest harmonic m reported

    Returns:
        Mapping m -> |F_m|² for m = 0..max_order

    Raises:
        DomainError: centre outside the grid
    """
    grid = img.grid
    if not grid.contains(center):
        raise DomainError(f"Centre {center} outside the grid")

    row0, col0 = grid.index_of(center)
    r_max = min(row0, col0, grid.n - 1 - row0, grid.n - 1 - col0)
    radii = np.arange(0.0, r_max, 0.5)
    phi = 2.0 * np.pi * np.arange(angular_samples) / angular_samples
    rr, pp = np.meshgrid(radii, phi, indexing="ij")
    coords = np.array([(row0 + rr * np.sin(pp)).ravel(), (col0 + rr * np.cos(pp)).ravel()])
    polar = ndimage.map_coordinates(_values(img), coords, order=1).reshape(rr.shape)

    profile = np.sum(polar * radii[:, None], axis=0)
    power = np.abs(sfft.fft(profile, workers=1)) ** 2
    return {m: float(power[m]) for m in range(max_order + 1)}


def dominant_harmonic(harmonics: Dict[int, float]) -> int:
    """Strongest m > 0."""
    return max((m for m in harmonics if m > 0), key=lambda m: harmonics[m])


def sharpness(img: ImageLike) -> float:
    """Variance of the Laplacian of the peak-normalized image."""
    values = _values(img)
    peak = values.max()
    if peak > 0:
        values = values / peak
    return float(np.var(ndimage.laplace(values)))


def central_ratio(img: ImageLike, radius_px: int = 1, at_centroid: bool = False) -> float:
    """
    Mean intensity in a small central patch relative to the image peak.

    Args:
        img: Intensity image
        radius_px: Patch half-width; 0 reads a single pixel
        at_centroid: Centre the patch on the intensity centroid instead of the grid centre
    """
    values = _values(img)
    peak = values.max()
    if not peak > 0:
        return 0.0
    n = values.shape[0]
    row = col = n // 2
    if at_centroid:
        rows, cols = np.indices(values.shape)
        total = values.sum()
        row = int(np.clip(np.rint(np.sum(rows * values) / total), radius_px, n - 1 - radius_px))
        col = int(np.clip(np.rint(np.sum(cols * values) / total), radius_px, n - 1 - radius_px))
    patch = values[row - radius_px:row + radius_px + 1, col - radius_px:col + radius_px + 1]
    return float(patch.mean() / peak)


def rms_radius(img: IntensityMap) -> float:
    """Intensity-weighted RMS distance from the intensity centroid, in meters."""
    values = _values(img)
    total = values.sum()
    if not total > 0:
        raise DegenerateImageError("RMS radius of an empty image")
    x, y = img.grid.mesh()
    cx = np.sum(x * values) / total
    cy = np.sum(y * values) / total
    return float(np.sqrt(np.sum(((x - cx) ** 2 + (y - cy) ** 2) * values) / total))


def chief_ray_magnification(train: OpticalTrain) -> float:
    """
    Image height per source height for rays pinned to the first aperture
    centre: m = A − B·A₁/B₁, with (A₁, B₁) up to the first aperture.
    Trains without an aperture (or with B₁ = 0) give the plain A.
    """
    total = ray_transfer_matrix(train)
    first = []
    for el in train.elements:
        if isinstance(el, Aperture):
            break
        first.append(el)
    else:
        return float(total[0, 0])

    m1 = ray_transfer_matrix(first)
    if m1[0, 1] == 0:
        return float(total[0, 0])
    return float(total[0, 0] - total[0, 1] * m1[0, 0] / m1[0, 1])


def resample_template(
    intensity: IntensityMap,
    magnification: float,
    target_grid: Grid2D
) -> IntensityMap:
    """
    Scale an intensity image by a (possibly negative) magnification onto a
    new grid, conserving total power. Samples falling outside the source
    window are zero.
    """
    if magnification == 0:
        raise DomainError("Magnification must be nonzero")
    src = intensity.grid
    x, y = target_grid.mesh()
    cols = (x / magnification) / src.pitch + src.n // 2
    rows = (y / magnification) / src.pitch + src.n // 2
    values = ndimage.map_coordinates(
        _values(intensity), np.array([rows.ravel(), cols.ravel()]), order=1, cval=0.0
    ).reshape(x.shape)
    return IntensityMap(target_grid, values / magnification ** 2, "raw")
