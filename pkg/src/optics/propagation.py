"""
Fourier-optics primitives: paraxial free-space transfer, hard apertures,
thin lenses, far-field stages and multi-element trains.

Fields are envelopes in a frame that may travel with a chief ray; grid
origins label coordinates but never enter the kernels. Forward
propagation by z multiplies the momentum amplitude by exp(-i z |κ|²/2k).
"""

from typing import Annotated, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import fft as sfft

from src.core.cache_manager import get_kernel_cache
from src.core.errors import ApertureResolutionError, DomainError
from src.core.grid import ComplexField, Grid2D
from src.optics.modes import to_momentum, to_position
from src.utils.logging_config import logger

# λ·|κ|max/2π above which the paraxial kernel is flagged
PARAXIAL_LIMIT = 0.1
RIM_TOLERANCE = 1e-9

_paraxial_warned = set()


class ApertureSpec(BaseModel):
    """Hard-edged circular opening."""

    model_config = ConfigDict(frozen=True)

    diameter_m: float = Field(gt=0)
    center: Tuple[float, float] = (0.0, 0.0)


class FreeSpace(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["freespace"] = "freespace"
    distance_m: float


class Lens(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["lens"] = "lens"
    focal_m: float

    @field_validator("focal_m")
    @classmethod
    def validate_focal(cls, v: float) -> float:
        if v == 0:
            raise ValueError("Focal length must be nonzero")
        return v


class FarField(BaseModel):
    """Fraunhofer stage: position at distance z maps to momentum as x = z·q/k."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["farfield"] = "farfield"
    distance_m: float

    @field_validator("distance_m")
    @classmethod
    def validate_distance(cls, v: float) -> float:
        if v == 0:
            raise ValueError("Far-field distance must be nonzero")
        return v


class Aperture(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["aperture"] = "aperture"
    spec: ApertureSpec


Element = Annotated[Union[FreeSpace, Lens, FarField, Aperture], Field(discriminator="kind")]


class OpticalTrain(BaseModel):
    """Ordered optical elements, applied left to right."""

    model_config = ConfigDict(frozen=True)

    elements: Tuple[Element, ...]

    @field_validator("elements")
    @classmethod
    def validate_elements(cls, v):
        if len(v) == 0:
            raise ValueError("Optical train needs at least one element")
        return v

    def apertures(self) -> List[ApertureSpec]:
        return [el.spec for el in self.elements if isinstance(el, Aperture)]

    def describe(self) -> str:
        return "; ".join(describe_element(el) for el in self.elements)


def describe_element(el) -> str:
    if isinstance(el, FreeSpace):
        return f"freespace:{el.distance_m * 1e3:g}mm"
    if isinstance(el, Lens):
        return f"lens:{el.focal_m * 1e3:g}mm"
    if isinstance(el, FarField):
        return f"farfield:{el.distance_m * 1e3:g}mm"
    c = el.spec.center
    return f"aperture:{el.spec.diameter_m * 1e6:g}um@{c[0] * 1e6:g}um,{c[1] * 1e6:g}um"


def _otf_kernel(grid: Grid2D, wavelength_m: float, distance_m: float) -> np.ndarray:
    def build():
        k = 2.0 * np.pi / wavelength_m
        return np.exp(-1j * distance_m * grid.radius_squared() / (2.0 * k))

    return get_kernel_cache().get_or_compute(
        "otf", (grid.n, grid.pitch, wavelength_m, distance_m), build
    )


def _chirp(grid: Grid2D, wavelength_m: float, curvature: float) -> np.ndarray:
    """exp(i·k·curvature·|x|²/2); curvature in 1/m (a lens of focal f has −1/f)."""
    def build():
        k = 2.0 * np.pi / wavelength_m
        return np.exp(0.5j * k * curvature * grid.radius_squared())

    return get_kernel_cache().get_or_compute(
        "chirp", (grid.n, grid.pitch, wavelength_m, curvature), build
    )


def _check_paraxial(grid: Grid2D, wavelength_m: float) -> None:
    kappa_max = np.hypot(*grid.origin) + np.sqrt(2.0) * (grid.n // 2) * grid.pitch
    ratio = wavelength_m * kappa_max / (2.0 * np.pi)
    key = (grid.n, grid.pitch, wavelength_m)
    if ratio > PARAXIAL_LIMIT and key not in _paraxial_warned:
        _paraxial_warned.add(key)
        logger.warning(
            f"Grid supports non-paraxial angles (λ|κ|max/2π = {ratio:.3f} > {PARAXIAL_LIMIT}); "
            f"Fresnel kernel accuracy degrades"
        )


def propagate_otf(field: ComplexField, distance_m: float) -> ComplexField:
    """
    Paraxial free-space propagation by multiplication with the optical
    transfer function exp(-i z |κ|²/2k).

    Args:
        field: Position- or momentum-domain field
        distance_m: Propagation distance (negative propagates backwards)

    Returns:
        Field in the same domain as the input
    """
    if distance_m == 0:
        return field

    if field.grid.domain == "momentum":
        _check_paraxial(field.grid, field.photon_wavelength_m)
        kernel = _otf_kernel(field.grid, field.photon_wavelength_m, distance_m)
        return field.with_values(field.values * kernel)

    spectrum = to_momentum(field)
    _check_paraxial(spectrum.grid, field.photon_wavelength_m)
    kernel = _otf_kernel(spectrum.grid, field.photon_wavelength_m, distance_m)
    return to_position(spectrum.with_values(spectrum.values * kernel), field.grid.origin)


def aperture_mask(grid: Grid2D, ap: ApertureSpec) -> np.ndarray:
    """Boolean disc indicator in absolute grid coordinates."""
    x, y = grid.mesh(absolute=True)
    r = ap.diameter_m / 2.0
    # relative slack so rim pixels survive pitch rounding
    return (x - ap.center[0]) ** 2 + (y - ap.center[1]) ** 2 <= r * r * (1.0 + RIM_TOLERANCE)


def apply_aperture(field: ComplexField, ap: ApertureSpec) -> ComplexField:
    """
    Multiply by a hard-edged disc.

    Raises:
        ApertureResolutionError: Diameter below two pixels
        DomainError: Momentum-domain field or centre outside the window
    """
    grid = field.grid
    if grid.domain != "position":
        raise DomainError("Apertures act on position-domain fields")
    if ap.diameter_m < 2.0 * grid.pitch:
        raise ApertureResolutionError(
            f"Aperture {ap.diameter_m * 1e6:.2f} um is under two pixels "
            f"({grid.pitch * 1e6:.2f} um pitch)"
        )

    half = grid.window / 2.0
    dx = np.abs(np.array(ap.center) - np.array(grid.origin))
    far_corner = np.hypot(dx[0] + half, dx[1] + half)
    if ap.diameter_m / 2.0 >= far_corner:
        return field
    if not grid.contains(ap.center):
        raise DomainError(
            f"Aperture centre {ap.center} outside the {grid.window * 1e3:.3f} mm window"
        )
    if np.any(dx + ap.diameter_m / 2.0 > half):
        logger.warning(f"Aperture {ap.diameter_m * 1e6:.1f} um clipped by the grid window")

    return field.with_values(field.values * aperture_mask(grid, ap))


def lens_stage(field: ComplexField, focal_m: float) -> ComplexField:
    """Thin lens: multiply by exp(-i k |x|²/2f)."""
    if field.grid.domain != "position":
        raise DomainError("Lenses act on position-domain fields")
    if np.isinf(focal_m):
        return field
    return field.with_values(field.values * _chirp(field.grid, field.photon_wavelength_m, -1.0 / focal_m))


def far_field_stage(field: ComplexField, distance_m: float) -> ComplexField:
    """Fixed-grid far field: lens of focal z followed by propagation over z."""
    return propagate_otf(lens_stage(field, distance_m), distance_m)


def element_matrix(el) -> np.ndarray:
    if isinstance(el, FreeSpace):
        return np.array([[1.0, el.distance_m], [0.0, 1.0]])
    if isinstance(el, Lens):
        return np.array([[1.0, 0.0], [-1.0 / el.focal_m, 1.0]])
    if isinstance(el, FarField):
        z = el.distance_m
        return np.array([[0.0, z], [-1.0 / z, 1.0]])
    return np.eye(2)


def ray_transfer_matrix(elements) -> np.ndarray:
    """
    Paraxial ABCD matrix of an element sequence (apertures are transparent).

    Args:
        elements: OpticalTrain or iterable of elements, first element first

    Returns:
        2x2 matrix M = M_n · ... · M_1
    """
    if isinstance(elements, OpticalTrain):
        elements = elements.elements
    m = np.eye(2)
    for el in elements:
        m = element_matrix(el) @ m
    return m


def _flip_axes(values: np.ndarray) -> np.ndarray:
    """Map index j to (n - j) mod n on both axes (coordinate reversal about the centre)."""
    return np.roll(values[::-1, ::-1], 1, axis=(0, 1))


def collins_transform(field: ComplexField, abcd: np.ndarray, tol: float = 1e-12) -> ComplexField:
    """
    Canonical diffraction integral for an ABCD system, evaluated with one FFT.

    U(u) = (k/iB)·exp(ikDu²/2B)·F[u·exp(ikAx²/2B)](ku/B), sampled with output
    pitch λ|B|/(n·pitch). Momentum-domain input with A = 0 is relabelled
    without a transform.

    Args:
        field: Position- or momentum-domain field
        abcd: 2x2 ray transfer matrix

    Returns:
        Position-domain field on the rescaled grid
    """
    (a, b), (c, d) = np.asarray(abcd, dtype=float)
    lam = field.photon_wavelength_m
    k = 2.0 * np.pi / lam

    if abs(b) < tol:
        # Imaging relation: u_out(x) = exp(ikCx²/2A)/A · u_in(x/A)
        if field.grid.domain == "momentum":
            field = to_position(field)
        if abs(a - 1.0) < tol and abs(d - 1.0) < tol:
            if c == 0:
                return field
            return field.with_values(field.values * _chirp(field.grid, lam, c))
        grid = Grid2D(field.grid.n, abs(a) * field.grid.pitch, "position")
        values = field.values / a
        if a < 0:
            values = _flip_axes(values)
        return ComplexField(grid, values * _chirp(grid, lam, c / a), lam)

    n = field.grid.n
    if field.grid.domain == "momentum" and abs(a) < tol:
        spectrum = field.values
        dkappa = field.grid.pitch
    else:
        if field.grid.domain == "momentum":
            field = to_position(field)
        weighted = field.values
        if a != 0:
            weighted = weighted * _chirp(field.grid, lam, a / b)
        spectrum = to_momentum(field.with_values(weighted)).values
        dkappa = 2.0 * np.pi / (n * field.grid.pitch)

    if b < 0:
        spectrum = _flip_axes(spectrum)

    grid = Grid2D(n, abs(b) * dkappa / k, "position")
    values = (k / (1j * b)) * spectrum * _chirp(grid, lam, d / b)
    return ComplexField(grid, values, lam)


def _apply_element(field: ComplexField, el) -> ComplexField:
    if isinstance(el, FreeSpace):
        return propagate_otf(field, el.distance_m)
    if isinstance(el, Lens):
        return lens_stage(field, el.focal_m)
    if isinstance(el, FarField):
        return far_field_stage(field, el.distance_m)
    return apply_aperture(field, el.spec)


def _segments(train: OpticalTrain):
    """Yield (abcd, aperture or None) for runs of non-aperture elements."""
    run = []
    for el in train.elements:
        if isinstance(el, Aperture):
            yield ray_transfer_matrix(run), el.spec
            run = []
        else:
            run.append(el)
    yield ray_transfer_matrix(run), None


def run_train(
    field: ComplexField,
    train: OpticalTrain,
    method: Literal["otf", "scaled"] = "otf"
) -> ComplexField:
    """
    Push a field through an optical train.

    Args:
        field: Input field (momentum-domain input is transformed as needed)
        train: Elements in order of travel
        method: 'otf' applies every element on the input grid; 'scaled'
            evaluates each aperture-free segment as one canonical transform
            with its natural output sampling

    Returns:
        Position-domain field at the last plane
    """
    if method == "otf":
        if field.grid.domain == "momentum":
            field = to_position(field)
        for i, el in enumerate(train.elements):
            field = _apply_element(field, el)
            logger.debug(
                f"Plane {i} after {describe_element(el)}: pitch={field.grid.pitch:.3e} m, "
                f"power={field.power():.6e}"
            )
        return field

    if method != "scaled":
        raise DomainError(f"Unknown propagation method: {method}")

    for i, (abcd, ap) in enumerate(_segments(train)):
        if not np.allclose(abcd, np.eye(2), rtol=0.0, atol=1e-15):
            field = collins_transform(field, abcd)
        elif field.grid.domain == "momentum":
            field = to_position(field)
        if ap is not None:
            field = apply_aperture(field, ap)
        logger.debug(
            f"Segment {i} (A={abcd[0, 0]:.4g}, B={abcd[0, 1]:.4g}): "
            f"pitch={field.grid.pitch:.3e} m, power={field.power():.6e}"
        )
    return field


def shift_train_for_carrier(
    train: OpticalTrain,
    carrier: Tuple[float, float],
    wavenumber: float
) -> Tuple[OpticalTrain, Tuple[float, float]]:
    """
    Express a train in the frame co-moving with a tilted carrier.

    The frame axis drifts by z·q/k over free space; a lens met off the
    frame axis bends the carrier by −k·s/f. Apertures are re-centred
    in frame coordinates; lenses and free space need no change.

    Args:
        train: Train in laboratory coordinates
        carrier: Transverse carrier momentum (qx, qy) at the input plane
        wavenumber: Vacuum wavenumber of the photon

    Returns:
        (shifted train, frame-axis offset at the output plane)
    """
    s = np.zeros(2)
    q = np.array(carrier, dtype=float)
    shifted = []
    for el in train.elements:
        if isinstance(el, FreeSpace):
            s = s + el.distance_m * q / wavenumber
            shifted.append(el)
        elif isinstance(el, Lens):
            q = q - wavenumber * s / el.focal_m
            shifted.append(el)
        elif isinstance(el, FarField):
            q = q - wavenumber * s / el.distance_m
            s = s + el.distance_m * q / wavenumber
            shifted.append(el)
        else:
            c = np.array(el.spec.center) - s
            spec = el.spec.model_copy(update={"center": (float(c[0]), float(c[1]))})
            shifted.append(Aperture(spec=spec))
    return OpticalTrain(elements=tuple(shifted)), (float(s[0]), float(s[1]))


def axial_distance_to_first_aperture(train: OpticalTrain) -> Optional[float]:
    """Distance travelled before the first aperture, or None if there is none."""
    z = 0.0
    for el in train.elements:
        if isinstance(el, Aperture):
            return z
        if isinstance(el, (FreeSpace, FarField)):
            z += el.distance_m
    return None
