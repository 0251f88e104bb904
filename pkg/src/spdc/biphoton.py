"""
Biphoton mode function, SPDC angular spectrum and the idler-traced signal
image behind an aperture-and-lens train.

The idler is integrated out by quadrature: idler momenta sit on the signal
momentum lattice, so the pump amplitude at q_s + q_i is an exact index
shift of the sampled pump spectrum. Every idler sample gives an independent
coherent signal field; images add their intensities.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage
from scipy import fft as sfft

from config.settings import settings
from src.core.errors import DegenerateImageError, DomainError, SamplingMissError
from src.core.grid import ComplexField, Grid2D, IntensityMap, Normalization
from src.core.parallel import ordered_map_reduce
from src.optics.crystal import CrystalParams, idler_annulus, mismatch_field, sinc_weight, wavenumbers
from src.optics.modes import PumpSpec, superpose, to_momentum
from src.optics.propagation import (
    OpticalTrain,
    axial_distance_to_first_aperture,
    run_train,
    shift_train_for_carrier,
)
from src.utils.logging_config import logger

# Fraction of the input power that must survive the train
MIN_TRANSMISSION = 1e-6


class IdlerSampling(BaseModel):
    """Idler quadrature: a square block of the momentum lattice clipped to the emission annulus."""

    model_config = ConfigDict(frozen=True)

    samples_per_axis: int = Field(default=32, ge=1)
    stride: int = Field(default=1, ge=1)
    threshold: float = Field(default=0.05, gt=0, lt=1)


@dataclass(frozen=True)
class IdlerSample:
    offset: Tuple[int, int]           # lattice offset (mx, my) from the block centre
    momentum: Tuple[float, float]     # q_i in rad/m
    weight: float


@dataclass
class BiphotonAmplitude:
    """
    Sampled Φ(q_s; q_i). Signal fields are produced on demand from the pump
    spectrum; `signal_field(i)` is deterministic.
    """

    signal_grid: Grid2D
    idler_samples: List[IdlerSample]
    crystal: CrystalParams
    pump: PumpSpec
    pump_spectrum: np.ndarray
    stride: int
    mismatch_phase: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def carrier(self) -> Tuple[float, float]:
        return self.signal_grid.origin

    @property
    def wavelength_m(self) -> float:
        return self.crystal.signal_wavelength_m

    def _signal_momenta(self) -> Tuple[np.ndarray, np.ndarray]:
        if "mesh" not in self._cache:
            self._cache["mesh"] = self.signal_grid.mesh(absolute=True)
        return self._cache["mesh"]

    def _wavenumbers(self) -> Tuple[float, float, float]:
        if "ks" not in self._cache:
            self._cache["ks"] = wavenumbers(self.crystal)
        return self._cache["ks"]

    def pump_at_sum(self, sample: IdlerSample) -> np.ndarray:
        """E₀(q_s + q_i) on the signal lattice (zero outside the pump window)."""
        mx, my = sample.offset
        return _shift(self.pump_spectrum, my * self.stride, mx * self.stride)

    def signal_field(self, index: int) -> ComplexField:
        sample = self.idler_samples[index]
        qsx, qsy = self._signal_momenta()
        dk, propagating = mismatch_field(
            qsx, qsy, sample.momentum[0], sample.momentum[1], self.crystal, self._wavenumbers()
        )
        weight = sinc_weight(dk, self.crystal.length_m, self.mismatch_phase) * propagating
        return ComplexField(self.signal_grid, self.pump_at_sum(sample) * weight, self.wavelength_m)

    def signal_fields(self) -> Iterator[Tuple[ComplexField, float]]:
        for i, sample in enumerate(self.idler_samples):
            yield self.signal_field(i), sample.weight

    def total_weight(self) -> float:
        return float(sum(s.weight for s in self.idler_samples))


def _shift(values: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """out[j, i] = values[j + dy, i + dx], zero where out of range."""
    n = values.shape[0]
    out = np.zeros_like(values)
    if abs(dx) >= n or abs(dy) >= n:
        return out
    ys_out = slice(max(0, -dy), min(n, n - dy))
    xs_out = slice(max(0, -dx), min(n, n - dx))
    ys_in = slice(max(0, dy), min(n, n + dy))
    xs_in = slice(max(0, dx), min(n, n + dx))
    out[ys_out, xs_out] = values[ys_in, xs_in]
    return out


def _sampling_miss(message: str, strict: Optional[bool]) -> None:
    strict = settings.strict if strict is None else strict
    if strict:
        raise SamplingMissError(message)
    logger.warning(f"[sampling-miss] {message}")


def chief_ray_carrier(train: OpticalTrain, crystal: CrystalParams) -> Tuple[float, float]:
    """
    Transverse momentum of the ray from the crystal centre through the
    first aperture centre (0 when the train has no aperture).
    """
    apertures = train.apertures()
    z = axial_distance_to_first_aperture(train)
    if not apertures or not z:
        return 0.0, 0.0
    k0 = 2.0 * np.pi / crystal.signal_wavelength_m
    cx, cy = apertures[0].center
    return float(k0 * cx / z), float(k0 * cy / z)


def build_biphoton(
    pump: PumpSpec,
    crystal: CrystalParams,
    signal_grid: Grid2D,
    idler_sampling: IdlerSampling = None,
    carrier: Tuple[float, float] = (0.0, 0.0),
    mismatch_phase: bool = True,
    strict: Optional[bool] = None
) -> BiphotonAmplitude:
    """
    Sample the biphoton mode function.

    Args:
        pump: Pump superposition
        crystal: Crystal parameters
        signal_grid: Position grid (n, pitch) of the crystal plane; the signal
            momentum lattice is its conjugate, centred on `carrier`
        idler_sampling: Idler quadrature descriptor
        carrier: Signal frame momentum q_c (see chief_ray_carrier)
        mismatch_phase: Keep the exp(iΔkL/2) factor
        strict: Raise instead of warn on sampling misses (defaults to settings)

    Returns:
        BiphotonAmplitude with one (lazy) signal field per idler sample

    Raises:
        SamplingMissError: strict mode and no idler sample carries pair amplitude
    """
    idler_sampling = idler_sampling or IdlerSampling()
    if signal_grid.domain != "position":
        raise DomainError("build_biphoton expects the crystal-plane position grid")

    try:
        pump_field = superpose(pump, signal_grid, crystal.pump_wavelength_m)
        spectrum = to_momentum(pump_field)
    except Exception as e:
        logger.error(f"Pump sampling failed: {e}")
        raise

    dkappa = spectrum.grid.pitch
    momentum_grid = Grid2D(signal_grid.n, dkappa, "momentum", (float(carrier[0]), float(carrier[1])))

    q_lo, q_hi = idler_annulus(crystal, idler_sampling.threshold)
    m_count = idler_sampling.samples_per_axis
    step = idler_sampling.stride * dkappa
    weight = step * step

    samples = []
    for my in range(-(m_count // 2), m_count - m_count // 2):
        for mx in range(-(m_count // 2), m_count - m_count // 2):
            qx = -carrier[0] + mx * step
            qy = -carrier[1] + my * step
            if q_lo <= np.hypot(qx, qy) <= q_hi:
                samples.append(IdlerSample((mx, my), (qx, qy), weight))

    bi = BiphotonAmplitude(
        signal_grid=momentum_grid,
        idler_samples=samples,
        crystal=crystal,
        pump=pump,
        pump_spectrum=np.array(spectrum.values),
        stride=idler_sampling.stride,
        mismatch_phase=mismatch_phase,
    )

    logger.info(
        f"Biphoton built: {len(samples)} idler samples in [{q_lo:.4e}, {q_hi:.4e}] rad/m, "
        f"carrier=({carrier[0]:.4e}, {carrier[1]:.4e}) rad/m, signal pitch={dkappa:.4e} rad/m"
    )

    if not samples:
        _sampling_miss("Idler block does not intersect the emission annulus", strict)
    elif biphoton_power(bi) < MIN_TRANSMISSION * bi.total_weight():
        _sampling_miss("All idler samples carry negligible pair amplitude", strict)

    return bi


def biphoton_power(bi: BiphotonAmplitude) -> float:
    """Σ_i w_i·‖Φ(·; q_i)‖² over the sampled idlers."""
    total = 0.0
    for signal, w in bi.signal_fields():
        total += w * signal.power()
    return total


def angular_spectrum(bi: BiphotonAmplitude, workers: Optional[int] = None) -> IntensityMap:
    """
    Signal angular spectrum R_s(q_s) = Σ_i w_i |Φ(q_s; q_i)|², peak-1.
    """
    n = bi.signal_grid.n
    total = ordered_map_reduce(
        lambda i: bi.idler_samples[i].weight * bi.signal_field(i).intensity(),
        range(len(bi.idler_samples)),
        lambda acc, img: acc + img,
        np.zeros((n, n)),
        workers,
    )
    image = IntensityMap(bi.signal_grid, total, "raw", {"raw_total": float(total.sum())})
    return image.normalized("peak-1")


@dataclass
class ImageComponents:
    """
    Per-idler coherent fields after an optical train, produced on demand.
    Iteration yields (field, weight) in idler order.
    """

    bi: Optional[BiphotonAmplitude]
    train: OpticalTrain
    method: str = "scaled"
    coherent_fields: Optional[List[Tuple[ComplexField, float]]] = None

    def __len__(self) -> int:
        if self.coherent_fields is not None:
            return len(self.coherent_fields)
        return len(self.bi.idler_samples)

    def component(self, index: int) -> Tuple[ComplexField, float]:
        if self.coherent_fields is not None:
            return self.coherent_fields[index]
        sample = self.bi.idler_samples[index]
        return run_train(self.bi.signal_field(index), self.train, self.method), sample.weight

    def __iter__(self) -> Iterator[Tuple[ComplexField, float]]:
        for i in range(len(self)):
            yield self.component(i)

    def map_reduce(self, fn: Callable, reduce: Callable, initial, workers: Optional[int] = None):
        """Apply fn(field, weight) to every component and fold in idler order."""
        return ordered_map_reduce(
            lambda i: fn(*self.component(i)), range(len(self)), reduce, initial, workers
        )


def image_components(
    bi: BiphotonAmplitude,
    train: OpticalTrain,
    method: Literal["otf", "scaled"] = "scaled"
) -> ImageComponents:
    """
    Per-idler coherent fields behind `train`, in the frame of the biphoton carrier.
    """
    k0 = 2.0 * np.pi / bi.wavelength_m
    shifted, offset = shift_train_for_carrier(train, bi.carrier, k0)
    logger.debug(f"Train in carrier frame: {shifted.describe()} (output axis offset {offset})")
    return ImageComponents(bi, shifted, method)


def marginal_image(
    bi: BiphotonAmplitude,
    train: OpticalTrain,
    method: Literal["otf", "scaled"] = "scaled",
    normalization: Normalization = "peak-1",
    workers: Optional[int] = None,
    strict: Optional[bool] = None
) -> IntensityMap:
    """
    Idler-traced signal intensity T_s after the train.

    Args:
        bi: Biphoton amplitude
        train: Elements from the crystal exit plane to the detector
        method: Propagation engine ('otf' or 'scaled')
        normalization: Output normalization ('raw' keeps quadrature units)
        workers: Thread count for the idler map

    Returns:
        IntensityMap on the detector grid; metadata carries the raw total,
        input power and transmitted fraction

    Raises:
        SamplingMissError: strict mode and under 1e-6 of the input power transmitted
    """
    components = image_components(bi, train, method)

    def per_idler(index: int):
        signal = bi.signal_field(index)
        out = run_train(signal, components.train, method)
        w = bi.idler_samples[index].weight
        return out.grid, w * out.intensity(), w * signal.power()

    def accumulate(acc, result):
        grid, image, power_in = result
        if acc is None:
            return grid, image.copy(), power_in
        return acc[0], acc[1] + image, acc[2] + power_in

    try:
        result = ordered_map_reduce(per_idler, range(len(bi.idler_samples)), accumulate, None, workers)
    except Exception as e:
        logger.error(f"Marginal image failed: {e}")
        raise

    if result is None:
        raise SamplingMissError("No idler samples to integrate")

    grid, total, power_in = result
    power_out = float(total.sum() * grid.pitch ** 2)
    fraction = power_out / power_in if power_in > 0 else 0.0
    if fraction < MIN_TRANSMISSION:
        _sampling_miss(f"Only {fraction:.3e} of the signal power passes the train", strict)

    logger.info(
        f"Marginal image reduced over {len(bi.idler_samples)} idlers: "
        f"pitch={grid.pitch:.3e} m, transmitted={fraction:.4e}"
    )
    metadata = {
        "raw_total": power_out,
        "input_power": power_in,
        "transmitted_fraction": fraction,
        "idler_samples": len(bi.idler_samples),
    }
    return IntensityMap(grid, total, "raw", metadata).normalized(normalization)


def coherent_control(
    pump: PumpSpec,
    crystal: CrystalParams,
    signal_grid: Grid2D,
    train: OpticalTrain,
    method: Literal["otf", "scaled"] = "scaled",
    carrier: Tuple[float, float] = None
) -> ImageComponents:
    """
    The pump profile itself, as one coherent beam at the signal wavelength in
    the same carrier frame, pushed through the same train.
    """
    carrier = chief_ray_carrier(train, crystal) if carrier is None else carrier
    spectrum = to_momentum(superpose(pump, signal_grid, crystal.signal_wavelength_m))
    grid = spectrum.grid.with_origin(carrier)
    beam = ComplexField(grid, spectrum.values, crystal.signal_wavelength_m)
    k0 = 2.0 * np.pi / crystal.signal_wavelength_m
    shifted, _ = shift_train_for_carrier(train, carrier, k0)
    out = run_train(beam, shifted, method)
    return ImageComponents(None, shifted, method, [(out, 1.0)])


def as_components(components) -> Union[ImageComponents, List[Tuple[ComplexField, float]]]:
    if isinstance(components, ComplexField):
        return [(components, 1.0)]
    return components


def polar_harmonics(
    field: ComplexField,
    center: Tuple[float, float] = (0.0, 0.0),
    angular_samples: int = 256
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Azimuthal Fourier coefficients c_m(r) of a field about `center`.
    For a field ∝ e^{-ilφ}, |c_m| peaks at m = l (negative m wrap modulo N).

    Returns:
        (radii, coefficients[radius, m])
    """
    grid = field.grid
    if not grid.contains(center):
        raise DomainError(f"Centre {center} outside the grid")
    row0, col0 = grid.index_of(center)
    r_max_px = min(row0, col0, grid.n - 1 - row0, grid.n - 1 - col0)
    radii_px = np.arange(0.0, r_max_px, 1.0)
    phi = 2.0 * np.pi * np.arange(angular_samples) / angular_samples

    rr, pp = np.meshgrid(radii_px, phi, indexing="ij")
    rows = row0 + rr * np.sin(pp)
    cols = col0 + rr * np.cos(pp)
    coords = np.array([rows.ravel(), cols.ravel()])
    real = ndimage.map_coordinates(field.values.real, coords, order=3)
    imag = ndimage.map_coordinates(field.values.imag, coords, order=3)
    ring = (real + 1j * imag).reshape(rr.shape)

    coefficients = sfft.ifft(ring, axis=1, workers=1)
    return radii_px * grid.pitch, coefficients


def oam_spectrum(
    components,
    center: Tuple[float, float] = (0.0, 0.0),
    max_order: int = 8,
    workers: Optional[int] = None
) -> Dict[int, float]:
    """
    Weight-summed azimuthal power P(l) = 2π Σ_r |c_l(r)|² r Δr, l in [−max_order, max_order].

    Args:
        components: ImageComponents, a list of (field, weight), or one ComplexField
        center: Decomposition centre in grid coordinates
        max_order: Largest |l| reported

    Raises:
        DomainError: centre outside the grid
    """
    components = as_components(components)
    angular_samples = max(64, int(2 ** np.ceil(np.log2(4 * (max_order + 1)))))
    orders = np.arange(-max_order, max_order + 1)

    def per_component(field: ComplexField, weight: float) -> np.ndarray:
        radii, c = polar_harmonics(field, center, angular_samples)
        dr = field.grid.pitch
        power = 2.0 * np.pi * np.sum(np.abs(c) ** 2 * radii[:, None] * dr, axis=0)
        return weight * power[orders % angular_samples]

    if isinstance(components, ImageComponents):
        total = components.map_reduce(per_component, lambda acc, p: acc + p, np.zeros(orders.size), workers)
    else:
        total = np.zeros(orders.size)
        for f, w in components:
            total = total + per_component(f, w)

    return {int(l): float(p) for l, p in zip(orders, total)}


def mean_oam(spectrum: Dict[int, float]) -> float:
    """Σ l·P(l) / Σ P(l)."""
    total = sum(spectrum.values())
    if not total > 0:
        raise DegenerateImageError("OAM spectrum has no power")
    return float(sum(l * p for l, p in spectrum.items()) / total)
