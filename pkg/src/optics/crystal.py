"""
Type-I birefringent phase matching: Sellmeier indices, longitudinal mismatch
and the sinc envelope of pair emission.
"""

from typing import Dict, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize

from src.core.errors import DispersionRangeError, DomainError, EvanescentError
from src.utils.logging_config import logger

Polarization = Literal["ordinary", "extraordinary"]
Momentum = Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]


class SellmeierCoefficients(BaseModel):
    """n²(λ) = A + B/(λ² − C) − D·λ², λ in µm."""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    d: float

    def index_squared(self, wavelength_um: float) -> float:
        lam2 = wavelength_um * wavelength_um
        return self.a + self.b / (lam2 - self.c) - self.d * lam2


class IndexModel(BaseModel):
    """Uniaxial crystal dispersion: ordinary and extraordinary Sellmeier sets."""

    model_config = ConfigDict(frozen=True)

    name: str
    ordinary: SellmeierCoefficients
    extraordinary: SellmeierCoefficients
    valid_range_um: Tuple[float, float] = (0.2, 2.6)


# Beta-barium borate, standard room-temperature set
BBO = IndexModel(
    name="bbo",
    ordinary=SellmeierCoefficients(a=2.7359, b=0.01878, c=0.01822, d=0.01354),
    extraordinary=SellmeierCoefficients(a=2.3753, b=0.01224, c=0.01667, d=0.01516),
)

INDEX_MODELS: Dict[str, IndexModel] = {
    "bbo": BBO,
}


class CrystalParams(BaseModel):
    """Nonlinear crystal and the three photon wavelengths."""

    model_config = ConfigDict(frozen=True)

    length_m: float = Field(default=5e-3, gt=0)
    cut_angle_rad: float = float(np.radians(29.97))
    pump_wavelength_m: float = Field(default=405e-9, gt=0)
    signal_wavelength_m: float = Field(default=810e-9, gt=0)
    idler_wavelength_m: float = Field(default=810e-9, gt=0)
    index_model: IndexModel = BBO

    @model_validator(mode="after")
    def validate_energy(self) -> "CrystalParams":
        """Ensure 1/λp = 1/λs + 1/λi."""
        inv_p = 1.0 / self.pump_wavelength_m
        inv_si = 1.0 / self.signal_wavelength_m + 1.0 / self.idler_wavelength_m
        if abs(inv_p - inv_si) > 1e-9 * inv_p:
            raise ValueError(
                f"Energy not conserved: 1/{self.pump_wavelength_m:.4e} != "
                f"1/{self.signal_wavelength_m:.4e} + 1/{self.idler_wavelength_m:.4e}"
            )
        return self

    def with_cut_angle(self, angle_rad: float) -> "CrystalParams":
        return self.model_copy(update={"cut_angle_rad": float(angle_rad)})


def refractive_index(
    model: IndexModel,
    wavelength_m: float,
    polarization: Polarization = "ordinary",
    propagation_angle_rad: float = 0.0
) -> float:
    """
    Refractive index for an ordinary or extraordinary wave.

    Args:
        model: Crystal dispersion model
        wavelength_m: Vacuum wavelength
        polarization: 'ordinary' or 'extraordinary'
        propagation_angle_rad: Angle between wavevector and optic axis

    Returns:
        n_o, or the effective index with 1/n² = cos²θ/n_o² + sin²θ/n_e²

    Raises:
        DispersionRangeError: Wavelength outside the model validity range
    """
    lam_um = wavelength_m * 1e6
    lo, hi = model.valid_range_um
    if not lo <= lam_um <= hi:
        raise DispersionRangeError(
            f"{lam_um:.4f} um outside the {model.name} range [{lo}, {hi}] um"
        )

    no2 = model.ordinary.index_squared(lam_um)
    if polarization == "ordinary":
        return float(np.sqrt(no2))
    if polarization != "extraordinary":
        raise DomainError(f"Unknown polarization: {polarization}")

    ne2 = model.extraordinary.index_squared(lam_um)
    c2 = np.cos(propagation_angle_rad) ** 2
    s2 = np.sin(propagation_angle_rad) ** 2
    return float(1.0 / np.sqrt(c2 / no2 + s2 / ne2))


def wavenumbers(crystal: CrystalParams, cut_angle_rad: float = None) -> Tuple[float, float, float]:
    """In-medium wavenumbers (k_p, k_s, k_i); pump extraordinary, signal/idler ordinary."""
    theta = crystal.cut_angle_rad if cut_angle_rad is None else cut_angle_rad
    model = crystal.index_model
    n_p = refractive_index(model, crystal.pump_wavelength_m, "extraordinary", theta)
    n_s = refractive_index(model, crystal.signal_wavelength_m, "ordinary")
    n_i = refractive_index(model, crystal.idler_wavelength_m, "ordinary")
    return (
        2.0 * np.pi * n_p / crystal.pump_wavelength_m,
        2.0 * np.pi * n_s / crystal.signal_wavelength_m,
        2.0 * np.pi * n_i / crystal.idler_wavelength_m,
    )


def mismatch_field(
    qsx, qsy, qix, qiy,
    crystal: CrystalParams,
    ks: Tuple[float, float, float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized Δk with an evanescence mask.

    Returns:
        (delta_k, propagating) where delta_k is 0 wherever propagating is False
    """
    k_p, k_s, k_i = ks or wavenumbers(crystal)
    qs2 = np.asarray(qsx) ** 2 + np.asarray(qsy) ** 2
    qi2 = np.asarray(qix) ** 2 + np.asarray(qiy) ** 2
    qp2 = (np.asarray(qsx) + qix) ** 2 + (np.asarray(qsy) + qiy) ** 2

    propagating = (qs2 < k_s * k_s) & (qi2 < k_i * k_i) & (qp2 < k_p * k_p)
    dk = (
        np.sqrt(np.where(propagating, k_p * k_p - qp2, 0.0))
        - np.sqrt(np.where(propagating, k_s * k_s - qs2, 0.0))
        - np.sqrt(np.where(propagating, k_i * k_i - qi2, 0.0))
    )
    return np.where(propagating, dk, 0.0), propagating


def delta_k(q_s: Momentum, q_i: Momentum, crystal: CrystalParams):
    """
    Longitudinal phase mismatch k_pz(q_s+q_i) − k_sz(q_s) − k_iz(q_i).

    Args:
        q_s: Signal transverse momentum (qx, qy) in rad/m
        q_i: Idler transverse momentum (qx, qy) in rad/m
        crystal: Crystal parameters

    Returns:
        Δk in rad/m (scalar or array, following the inputs)

    Raises:
        EvanescentError: Any momentum at or beyond its cutoff
    """
    dk, propagating = mismatch_field(q_s[0], q_s[1], q_i[0], q_i[1], crystal)
    if not np.all(propagating):
        raise EvanescentError("Transverse momentum beyond the evanescent cutoff")
    return float(dk) if np.ndim(dk) == 0 else dk


def sinc_weight(dk: np.ndarray, length_m: float, mismatch_phase: bool = True) -> np.ndarray:
    """sinc(ΔkL/2)·e^{iΔkL/2} (phase omitted when mismatch_phase is False)."""
    half = np.asarray(dk) * (length_m / 2.0)
    weight = np.sinc(half / np.pi).astype(np.complex128)
    if mismatch_phase:
        weight = weight * np.exp(1j * half)
    return weight


def phase_matching_weight(q_s: Momentum, q_i: Momentum, crystal: CrystalParams, mismatch_phase: bool = True):
    """
    Phase-matching amplitude sinc(ΔkL/2)·exp(iΔkL/2).

    Raises:
        EvanescentError: propagated from delta_k
    """
    weight = sinc_weight(delta_k(q_s, q_i, crystal), crystal.length_m, mismatch_phase)
    return complex(weight) if np.ndim(weight) == 0 else weight


def _radial_mismatch(q: float, k_p: float, k_s: float, k_i: float) -> float:
    """Δk for anti-parallel signal/idler of radius q (pump transverse momentum 0)."""
    return k_p - np.sqrt(k_s * k_s - q * q) - np.sqrt(k_i * k_i - q * q)


def collinear_phase_matching_angle(crystal: CrystalParams) -> float:
    """
    Cut angle at which Δk(0, 0) = 0.

    Raises:
        DomainError: No collinear phase matching between 0 and 90 degrees
    """
    def residual(theta: float) -> float:
        k_p, k_s, k_i = wavenumbers(crystal, theta)
        return k_p - k_s - k_i

    lo, hi = 0.0, np.pi / 2
    if residual(lo) * residual(hi) > 0:
        raise DomainError(f"No collinear phase matching for {crystal.index_model.name}")
    theta = optimize.brentq(residual, lo, hi, xtol=1e-14)
    logger.debug(f"Collinear phase-matching angle: {np.degrees(theta):.4f} deg")
    return float(theta)


def _radial_root(target: float, k_p: float, k_s: float, k_i: float, q_hi: float) -> float:
    """Radius where the radial mismatch equals target (monotonic in q)."""
    f = lambda q: _radial_mismatch(q, k_p, k_s, k_i) - target
    if f(0.0) >= 0:
        return 0.0
    if f(q_hi) < 0:
        return q_hi
    return float(optimize.brentq(f, 0.0, q_hi, xtol=1e-9))


def ring_radius(crystal: CrystalParams, scan_samples: int = 2048) -> float:
    """
    Internal transverse momentum of the emission ring: maximizer of
    sinc²(Δk(q, −q)·L/2) over q, refined by root finding on Δk = 0.

    Args:
        crystal: Crystal parameters
        scan_samples: Radial scan resolution used to bracket the maximum

    Returns:
        Ring radius in rad/m (0 for collinear or non-phase-matched cuts)
    """
    k_p, k_s, k_i = wavenumbers(crystal)
    q_max = 0.2 * min(k_s, k_i)
    q = np.linspace(0.0, q_max, scan_samples)
    dk = _radial_mismatch(q, k_p, k_s, k_i)
    envelope = np.sinc(dk * crystal.length_m / (2.0 * np.pi)) ** 2
    best = int(np.argmax(envelope))

    if dk[0] >= 0 or best == 0:
        return 0.0

    lo = q[max(best - 1, 0)]
    hi = q[min(best + 1, scan_samples - 1)]
    if _radial_mismatch(lo, k_p, k_s, k_i) * _radial_mismatch(hi, k_p, k_s, k_i) < 0:
        return float(optimize.brentq(lambda v: _radial_mismatch(v, k_p, k_s, k_i), lo, hi, xtol=1e-9))
    return float(q[best])


def sinc_threshold_argument(threshold: float) -> float:
    """x in (0, π) with sinc²(x) = threshold."""
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"Annulus threshold must be in (0, 1), got {threshold}")
    return float(optimize.brentq(lambda x: (np.sin(x) / x) ** 2 - threshold, 1e-9, np.pi))


def idler_annulus(crystal: CrystalParams, threshold: float = 0.05) -> Tuple[float, float]:
    """
    Radial band of the main emission lobe where sinc² ≥ threshold.

    Returns:
        (q_min, q_max) in rad/m; q_min is 0 when the lobe covers the axis
    """
    k_p, k_s, k_i = wavenumbers(crystal)
    x_t = sinc_threshold_argument(threshold)
    bound = 2.0 * x_t / crystal.length_m
    q_cap = 0.2 * min(k_s, k_i)
    q_lo = _radial_root(-bound, k_p, k_s, k_i, q_cap)
    q_hi = _radial_root(bound, k_p, k_s, k_i, q_cap)
    logger.debug(f"Idler annulus (threshold {threshold}): [{q_lo:.4e}, {q_hi:.4e}] rad/m")
    return q_lo, q_hi


def ring_position(crystal: CrystalParams, distance_m: float, angle_rad: float) -> Tuple[float, float]:
    """
    Point on the signal ring in a plane `distance_m` behind the crystal.

    Transverse momentum is conserved across the exit face, so the external
    angle is q/k0 with the vacuum signal wavenumber.
    """
    k0 = 2.0 * np.pi / crystal.signal_wavelength_m
    r = distance_m * ring_radius(crystal) / k0
    return float(r * np.cos(angle_rad)), float(r * np.sin(angle_rad))
