"""
Forked phase holograms and first-order phase-flattening readout.
"""

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from src.core.errors import DomainError, GratingResolutionError, OrderOverlapError
from src.core.grid import ComplexField, Grid2D, IntensityMap, Normalization
from src.optics.propagation import collins_transform
from src.spdc.biphoton import ImageComponents, as_components
from src.utils.logging_config import logger

MIN_PERIOD_PX = 4
# Share of the diffracted power the first-order window must hold
MIN_WINDOW_FRACTION = 0.9


@dataclass(frozen=True)
class ForkHologram:
    """Blazed fork grating; transmission exp(i(2πx/Λ − lφ)) adds OAM l."""

    order: int
    grating_period_m: float
    grid: Grid2D
    transmission: np.ndarray
    kind: Literal["phase-blazed"] = "phase-blazed"

    @property
    def period_px(self) -> float:
        return self.grating_period_m / self.grid.pitch


def fork_hologram(l: int, period_m: float, grid: Grid2D) -> ForkHologram:
    """
    Build a fork hologram centred on the grid.

    Args:
        l: Fork order (topological charge added to the first order)
        period_m: Grating period
        grid: Position-domain grid of the hologram plane

    Raises:
        GratingResolutionError: period under four pixels
    """
    if grid.domain != "position":
        raise DomainError("Holograms live on position grids")
    if period_m < MIN_PERIOD_PX * grid.pitch:
        raise GratingResolutionError(
            f"Grating period {period_m * 1e6:.2f} um is under {MIN_PERIOD_PX} pixels "
            f"({grid.pitch * 1e6:.2f} um pitch)"
        )
    x, y = grid.mesh()
    phase = 2.0 * np.pi * x / period_m - l * np.arctan2(y, x)
    transmission = np.exp(1j * phase)
    transmission.setflags(write=False)
    return ForkHologram(l, period_m, grid, transmission)


def phase_circulation(holo: ForkHologram, radius_px: int = None) -> float:
    """
    Winding of the hologram phase around the centre in OAM units, measured
    along a square pixel loop (equals the fork order).
    """
    n = holo.grid.n
    c = n // 2
    r = radius_px or n // 4
    phase = np.angle(holo.transmission)

    top = [(c - r, j) for j in range(c - r, c + r)]
    right = [(i, c + r) for i in range(c - r, c + r)]
    bottom = [(c + r, j) for j in range(c + r, c - r, -1)]
    left = [(i, c - r) for i in range(c + r, c - r, -1)]
    loop = top + right + bottom + left + [top[0]]

    values = np.array([phase[i, j] for i, j in loop])
    steps = np.angle(np.exp(1j * np.diff(values)))
    # Counterclockwise loop in (x, y); a phase −lφ winds by −2πl
    return float(-np.sum(steps) / (2.0 * np.pi))


def _first_order_window(grid: Grid2D, offset_px: int) -> np.ndarray:
    x, y = grid.mesh()
    radius = offset_px / 2.0 * grid.pitch
    return (x - offset_px * grid.pitch) ** 2 + y ** 2 <= radius * radius


def diffract_first_order(
    components,
    holo: ForkHologram,
    readout_focal_m: float,
    coherent: bool = False,
    normalization: Normalization = "peak-1",
    workers: Optional[int] = None
) -> IntensityMap:
    """
    Project fields onto a fork hologram and read out the first diffraction
    order in the Fourier plane of a lens.

    Args:
        components: ImageComponents, list of (field, weight), or one ComplexField
        holo: Fork hologram on the component grid
        readout_focal_m: Focal length of the 2f readout
        coherent: Sum amplitudes instead of intensities
        normalization: Output normalization

    Returns:
        First-order intensity re-centred on the grid; metadata carries the
        window fraction, the incident power and the on-axis brightness per
        unit incident power

    Raises:
        OrderOverlapError: under 90% of the diffracted power inside the window
    """
    components = as_components(components)
    abcd = np.array([[0.0, readout_focal_m], [-1.0 / readout_focal_m, 0.0]])
    offset_px = int(round(holo.grid.n / holo.period_px))

    def per_component(field: ComplexField, weight: float):
        if field.grid.n != holo.grid.n or not np.isclose(field.grid.pitch, holo.grid.pitch):
            raise DomainError(
                f"Field grid (n={field.grid.n}, pitch={field.grid.pitch:.3e}) does not match "
                f"hologram grid (n={holo.grid.n}, pitch={holo.grid.pitch:.3e})"
            )
        out = collins_transform(field.with_values(field.values * holo.transmission), abcd)
        window = _first_order_window(out.grid, offset_px)
        first = np.roll(out.values * window, -offset_px, axis=1)
        total_power = np.sum(np.abs(out.values) ** 2)
        window_power = np.sum(np.abs(first) ** 2)
        if coherent:
            return out.grid, np.sqrt(weight) * first, weight * window_power, weight * total_power
        return out.grid, weight * np.abs(first) ** 2, weight * window_power, weight * total_power

    def accumulate(acc, result):
        if acc is None:
            grid, value, w_power, t_power = result
            return grid, np.array(value), w_power, t_power
        return acc[0], acc[1] + result[1], acc[2] + result[2], acc[3] + result[3]

    if isinstance(components, ImageComponents):
        acc = components.map_reduce(per_component, accumulate, None, workers)
    else:
        acc = None
        for f, w in components:
            acc = accumulate(acc, per_component(f, w))

    if acc is None:
        raise DomainError("No fields to project")

    grid, summed, window_power, total_power = acc
    fraction = window_power / total_power if total_power > 0 else 0.0
    if fraction < MIN_WINDOW_FRACTION:
        raise OrderOverlapError(
            f"Only {fraction:.1%} of the diffracted power falls in the first-order window; "
            f"increase the grid or reduce the period ({holo.period_px:.1f} px)"
        )

    image = np.abs(summed) ** 2 if coherent else summed
    c = grid.n // 2
    logger.info(
        f"Fork l={holo.order} readout ({'coherent' if coherent else 'incoherent'}): "
        f"window fraction {fraction:.3f}"
    )
    metadata = {
        "fork_order": holo.order,
        "window_fraction": float(fraction),
        "raw_total": float(np.sum(image)),
        "input_power": float(total_power * grid.pitch ** 2),
        # on-axis intensity per unit power reaching the hologram
        "centre_brightness": float(image[c, c] / total_power) if total_power > 0 else 0.0,
    }
    return IntensityMap(grid, image, "raw", metadata).normalized(normalization)
