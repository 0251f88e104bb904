"""
Laguerre-Gaussian pump modes, coaxial superpositions and the centred
unitary Fourier transform between position and momentum space.
"""

from typing import Annotated, Tuple

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, field_validator
from scipy import fft as sfft
from scipy import special

from src.core.errors import DegenerateSpecError, DomainError, GridResolutionError
from src.core.grid import ComplexField, Grid2D
from src.utils.logging_config import logger

PUMP_WAVELENGTH_M = 405e-9


def _parse_complex(value) -> complex:
    """Accept numbers, numeric strings ('1', '-1', '0.5+0.5j') and [re, im] pairs."""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        return complex(value.strip().replace(" ", "").replace("i", "j"))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"Cannot interpret {value!r} as a complex coefficient")


Coefficient = Annotated[complex, BeforeValidator(_parse_complex)]


class PumpTerm(BaseModel):
    """One LG_p^l term of a pump superposition."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: int = Field(ge=0)
    l: int
    c: Coefficient = 1.0 + 0.0j


class PumpSpec(BaseModel):
    """Symbolic pump: LG terms sharing one waist."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    terms: Tuple[PumpTerm, ...]
    waist_m: float = Field(gt=0)

    @field_validator("terms")
    @classmethod
    def validate_terms(cls, v):
        """Ensure at least one term."""
        if len(v) == 0:
            raise ValueError("Pump needs at least one LG term")
        return v

    @classmethod
    def single(cls, p: int, l: int, waist_m: float) -> "PumpSpec":
        return cls(terms=(PumpTerm(p=p, l=l),), waist_m=waist_m)

    def describe(self) -> str:
        """Compact 'p:l:c' listing used in logs and manifests."""
        parts = []
        for t in self.terms:
            c = t.c
            coeff = f"{c.real:g}" if c.imag == 0 else f"{c.real:g}{c.imag:+g}j"
            parts.append(f"{t.p}:{t.l}:{coeff}")
        return ", ".join(parts)


def _centered_transform(values: np.ndarray, pitch: float, inverse: bool) -> np.ndarray:
    """
    Unitary continuum transform (1/2π)∫u e^{∓iκ·x} d²x sampled on a centred grid.
    The prefactor n·pitch²/2π is the same in both directions.
    """
    n = values.shape[0]
    shifted = sfft.ifftshift(values)
    if inverse:
        out = sfft.ifft2(shifted, norm="ortho", workers=1)
    else:
        out = sfft.fft2(shifted, norm="ortho", workers=1)
    return sfft.fftshift(out) * (n * pitch * pitch / (2.0 * np.pi))


def to_momentum(field: ComplexField, origin: Tuple[float, float] = (0.0, 0.0)) -> ComplexField:
    """
    Transform a position-space field to momentum space.

    Args:
        field: Position-domain field
        origin: Momentum labelling of the central sample (carrier of the envelope)

    Returns:
        Momentum-domain field with pitch 2π/(n·pitch), same power
    """
    if field.grid.domain != "position":
        raise DomainError("to_momentum expects a position-domain field")
    values = _centered_transform(field.values, field.grid.pitch, inverse=False)
    return field.with_values(values, field.grid.conjugate(origin))


def to_position(field: ComplexField, origin: Tuple[float, float] = (0.0, 0.0)) -> ComplexField:
    """Inverse of to_momentum."""
    if field.grid.domain != "momentum":
        raise DomainError("to_position expects a momentum-domain field")
    values = _centered_transform(field.values, field.grid.pitch, inverse=True)
    return field.with_values(values, field.grid.conjugate(origin))


def lg_amplitude(p: int, l: int, waist_m: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Normalized LG_p^l amplitude at the waist, phase winding e^{-ilφ}.

    Args:
        p: Radial index (>= 0)
        l: Azimuthal index
        waist_m: Beam waist w
        x, y: Coordinate arrays in meters

    Returns:
        Complex amplitude with unit L2 norm over the plane
    """
    if p < 0:
        raise DomainError(f"Radial index must be nonnegative, got p={p}")
    al = abs(l)
    r2 = (x * x + y * y) / (waist_m * waist_m)
    log_norm = 0.5 * (np.log(2.0 / np.pi) + special.gammaln(p + 1) - special.gammaln(p + al + 1))
    radial = (
        (np.sqrt(2.0 * r2) ** al)
        * special.eval_genlaguerre(p, al, 2.0 * r2)
        * np.exp(-r2)
    )
    phase = np.exp(-1j * l * np.arctan2(y, x))
    return np.exp(log_norm) / waist_m * radial * phase


def lg_mode(p: int, l: int, waist_m: float, grid: Grid2D) -> ComplexField:
    """
    Sample LG_p^l on a position grid.

    Args:
        p: Radial index
        l: Azimuthal index
        waist_m: Beam waist in meters
        grid: Position-domain grid

    Returns:
        ComplexField with photon wavelength left to the caller (pump default 405 nm)

    Raises:
        GridResolutionError: waist below 4 pixels or above a quarter window
        DomainError: negative radial index or momentum grid
    """
    if grid.domain != "position":
        raise DomainError("lg_mode expects a position-domain grid")
    if p < 0:
        raise DomainError(f"Radial index must be nonnegative, got p={p}")
    if waist_m < 4 * grid.pitch or waist_m > grid.window / 4:
        raise GridResolutionError(
            f"Waist {waist_m:.3e} m not resolvable on grid n={grid.n}, "
            f"pitch={grid.pitch:.3e} m (need 4*pitch <= w <= n*pitch/4)"
        )
    x, y = grid.mesh()
    return ComplexField(grid, lg_amplitude(p, l, waist_m, x, y), PUMP_WAVELENGTH_M)


def superpose(spec: PumpSpec, grid: Grid2D, wavelength_m: float = None) -> ComplexField:
    """
    Coherent sum of the pump terms, renormalized to unit power.

    Raises:
        DegenerateSpecError: all coefficients zero or the terms cancel
    """
    if all(t.c == 0 for t in spec.terms):
        raise DegenerateSpecError("All pump coefficients are zero")

    total = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for term in spec.terms:
        if term.c == 0:
            continue
        total += term.c * lg_mode(term.p, term.l, spec.waist_m, grid).values

    field = ComplexField(grid, total, wavelength_m or PUMP_WAVELENGTH_M)
    power = field.power()
    if not power > 1e-12:
        raise DegenerateSpecError(f"Pump terms cancel: {spec.describe()}")

    logger.debug(f"Pump [{spec.describe()}] w={spec.waist_m:.3e} m sampled on n={grid.n}")
    return field.with_values(field.values / np.sqrt(power))


def pump_intensity(spec: PumpSpec, grid: Grid2D) -> np.ndarray:
    return superpose(spec, grid).intensity()


def inner_product(a: ComplexField, b: ComplexField) -> complex:
    """Grid inner product ⟨a, b⟩ = Σ conj(a)·b·pitch²."""
    return complex(np.vdot(a.values, b.values) * a.grid.pitch ** 2)

