"""
Sellmeier indices, phase mismatch and ring geometry for type-I BBO.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import DispersionRangeError, EvanescentError
from src.optics.crystal import (
    BBO,
    CrystalParams,
    collinear_phase_matching_angle,
    delta_k,
    idler_annulus,
    phase_matching_weight,
    refractive_index,
    ring_position,
    ring_radius,
    sinc_threshold_argument,
    sinc_weight,
    wavenumbers,
)


def test_bbo_ordinary_indices():
    assert refractive_index(BBO, 810e-9) == pytest.approx(1.6603, abs=1e-3)
    assert refractive_index(BBO, 405e-9) == pytest.approx(1.6919, abs=1e-3)


def test_extraordinary_index_interpolates_between_axes():
    n_o = refractive_index(BBO, 405e-9, "ordinary")
    assert refractive_index(BBO, 405e-9, "extraordinary", 0.0) == pytest.approx(n_o)
    assert refractive_index(BBO, 405e-9, "extraordinary", np.pi / 2) == pytest.approx(1.5671, abs=1e-3)
    mid = refractive_index(BBO, 405e-9, "extraordinary", np.radians(29.97))
    assert 1.5671 < mid < n_o


def test_out_of_range_wavelength():
    with pytest.raises(DispersionRangeError):
        refractive_index(BBO, 3e-6)


def test_energy_conservation_is_enforced():
    with pytest.raises(ValidationError):
        CrystalParams(signal_wavelength_m=800e-9, idler_wavelength_m=810e-9)
    CrystalParams(signal_wavelength_m=780e-9, idler_wavelength_m=1.0 / (1 / 405e-9 - 1 / 780e-9))


def test_collinear_angle_below_cut(crystal):
    theta = np.degrees(collinear_phase_matching_angle(crystal))
    assert 28.5 < theta < 29.2
    # A cut beyond the collinear angle opens a ring: Δk(0, 0) < 0
    assert delta_k((0.0, 0.0), (0.0, 0.0), crystal) < 0


def test_ring_radius_is_phase_matched(crystal):
    q = ring_radius(crystal)
    assert 6.0e5 < q < 7.5e5
    assert abs(delta_k((q, 0.0), (-q, 0.0), crystal)) < 1.0


def test_no_ring_below_collinear_angle(crystal):
    theta = collinear_phase_matching_angle(crystal)
    assert ring_radius(crystal.with_cut_angle(theta - np.radians(0.5))) == 0.0


def test_ring_radius_does_not_depend_on_length(crystal, thin_crystal):
    assert ring_radius(thin_crystal) == pytest.approx(ring_radius(crystal), rel=1e-6)


def test_annulus_brackets_ring(crystal, thin_crystal):
    q = ring_radius(crystal)
    lo, hi = idler_annulus(crystal, 0.05)
    assert lo < q < hi
    thin_lo, thin_hi = idler_annulus(thin_crystal, 0.05)
    assert thin_hi - thin_lo > 10 * (hi - lo)


def test_sinc_threshold_argument():
    x = sinc_threshold_argument(0.05)
    assert (np.sin(x) / x) ** 2 == pytest.approx(0.05)


def test_sinc_weight_phase_and_modulus():
    dk = np.array([0.0, 500.0, 1000.0])
    with_phase = sinc_weight(dk, 5e-3, True)
    without = sinc_weight(dk, 5e-3, False)
    assert with_phase[0] == 1.0
    assert np.allclose(np.abs(with_phase), np.abs(without))
    assert np.allclose(np.angle(with_phase[1:]), dk[1:] * 2.5e-3)


def test_phase_matching_weight_peaks_on_ring(crystal):
    q = ring_radius(crystal)
    on_ring = abs(phase_matching_weight((q, 0.0), (-q, 0.0), crystal))
    off_ring = abs(phase_matching_weight((0.0, 0.0), (0.0, 0.0), crystal))
    assert on_ring == pytest.approx(1.0, abs=1e-6)
    assert off_ring < on_ring


def test_evanescent_momentum_is_rejected(crystal):
    _, k_s, _ = wavenumbers(crystal)
    with pytest.raises(EvanescentError):
        delta_k((1.01 * k_s, 0.0), (0.0, 0.0), crystal)


def test_ring_position_scales_with_distance(crystal):
    k0 = 2 * np.pi / crystal.signal_wavelength_m
    x, y = ring_position(crystal, 0.05, np.pi / 2)
    assert x == pytest.approx(0.0, abs=1e-12)
    assert y == pytest.approx(0.05 * ring_radius(crystal) / k0)
    assert ring_position(crystal, 0.10, 0.0)[0] == pytest.approx(2 * y)


def test_delta_k_symmetries(crystal):
    q_s, q_i = (3.0e5, -1.2e5), (-2.5e5, 4.0e4)
    dk = delta_k(q_s, q_i, crystal)
    # degenerate pair: swapping the photons or reversing both momenta changes nothing
    assert delta_k(q_i, q_s, crystal) == pytest.approx(dk, rel=1e-12, abs=1e-9)
    assert delta_k((-q_s[0], -q_s[1]), (-q_i[0], -q_i[1]), crystal) == pytest.approx(dk, rel=1e-12, abs=1e-9)
    a = np.radians(37.0)
    rot = lambda q: (q[0] * np.cos(a) - q[1] * np.sin(a), q[0] * np.sin(a) + q[1] * np.cos(a))
    assert delta_k(rot(q_s), rot(q_i), crystal) == pytest.approx(dk, rel=1e-9, abs=1e-6)


def test_collinear_mismatch_vanishes_at_matching_angle(crystal):
    matched = crystal.with_cut_angle(collinear_phase_matching_angle(crystal))
    k_p, _, _ = wavenumbers(matched)
    assert abs(delta_k((0.0, 0.0), (0.0, 0.0), matched)) <= 1e-6 * k_p
    assert ring_radius(matched) < 1e3
