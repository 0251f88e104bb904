"""
Biphoton sampling, the SPDC ring, idler-traced images and OAM spectra.
"""

from dataclasses import replace

import numpy as np
import pytest

from src.analysis.metrics import (
    azimuthal_harmonics,
    central_ratio,
    chief_ray_magnification,
    dominant_harmonic,
    ncc,
    resample_template,
)
from src.core.errors import DegenerateImageError, SamplingMissError
from src.core.grid import Grid2D, IntensityMap
from src.optics.crystal import CrystalParams, idler_annulus, ring_radius
from src.optics.modes import PumpSpec, lg_mode, pump_intensity
from src.spdc.biphoton import (
    IdlerSampling,
    angular_spectrum,
    build_biphoton,
    chief_ray_carrier,
    coherent_control,
    image_components,
    marginal_image,
    mean_oam,
    oam_spectrum,
)
from tests.conftest import IMAGE_PLANE_M, make_pump


def _template(pump, grid, train, image):
    source = IntensityMap(grid, pump_intensity(pump, grid))
    return resample_template(source, chief_ray_magnification(train), image.grid)


def _thin_image(thin_crystal, pump, grid, train, samples, **kwargs):
    carrier = chief_ray_carrier(train, thin_crystal)
    bi = build_biphoton(pump, thin_crystal, grid, IdlerSampling(samples_per_axis=samples), carrier, False)
    return marginal_image(bi, train, **kwargs)


def test_idler_samples_lie_on_lattice_inside_annulus(crystal, crystal_grid, hg_pump, ring_train):
    train = ring_train(crystal, 200.0)
    carrier = chief_ray_carrier(train, crystal)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=16), carrier)

    lo, hi = idler_annulus(crystal, 0.05)
    dkappa = bi.signal_grid.pitch
    assert bi.idler_samples
    for s in bi.idler_samples:
        assert lo <= np.hypot(*s.momentum) <= hi
        assert s.momentum[0] == pytest.approx(-carrier[0] + s.offset[0] * dkappa)
        assert s.momentum[1] == pytest.approx(-carrier[1] + s.offset[1] * dkappa)
        assert s.weight == pytest.approx(dkappa ** 2)


def test_carrier_points_at_the_ring(crystal, ring_train):
    qx, qy = chief_ray_carrier(ring_train(crystal, 200.0, angle_deg=90.0), crystal)
    assert qx == pytest.approx(0.0, abs=1e-6)
    assert qy == pytest.approx(ring_radius(crystal), rel=1e-9)


def test_idler_block_off_the_ring_is_a_sampling_miss(crystal, crystal_grid, hg_pump):
    sampling = IdlerSampling(samples_per_axis=4)
    with pytest.raises(SamplingMissError):
        build_biphoton(hg_pump, crystal, crystal_grid, sampling, (0.0, 0.0), strict=True)

    bi = build_biphoton(hg_pump, crystal, crystal_grid, sampling, (0.0, 0.0), strict=False)
    assert bi.idler_samples == []


def test_pump_at_sum_is_an_index_shift(crystal, crystal_grid, hg_pump, ring_train):
    carrier = chief_ray_carrier(ring_train(crystal, 200.0), crystal)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=16), carrier)
    sample = bi.idler_samples[len(bi.idler_samples) // 2]
    mx, my = sample.offset
    shifted = bi.pump_at_sum(sample)
    j, i = 64, 64
    assert shifted[j, i] == bi.pump_spectrum[j + my, i + mx]
    assert shifted[j - 5, i + 3] == bi.pump_spectrum[j - 5 + my, i + 3 + mx]


@pytest.fixture(scope="module")
def ring_setup():
    crystal = CrystalParams(length_m=1e-3)
    grid = Grid2D(128, 3.5e-6)
    pump = PumpSpec.single(0, 0, 25e-6)
    return crystal, grid, pump


@pytest.fixture(scope="module")
def ring_spectrum(ring_setup):
    crystal, grid, pump = ring_setup
    bi = build_biphoton(pump, crystal, grid, IdlerSampling(samples_per_axis=128, threshold=0.001))
    return angular_spectrum(bi)


@pytest.mark.slow
def test_angular_spectrum_peaks_on_ring(ring_setup, ring_spectrum):
    crystal = ring_setup[0]
    grid = ring_spectrum.grid
    qx, qy = grid.mesh(absolute=True)
    bins = np.rint(np.hypot(qx, qy) / grid.pitch).astype(int)
    sums = np.bincount(bins.ravel(), weights=ring_spectrum.values.ravel())
    counts = np.bincount(bins.ravel())
    profile = sums / np.maximum(counts, 1)
    peak = np.argmax(profile[: grid.n // 2]) * grid.pitch
    assert abs(peak - ring_radius(crystal)) <= 3 * grid.pitch


@pytest.mark.slow
def test_angular_spectrum_is_isotropic(ring_spectrum):
    grid = ring_spectrum.grid
    qx, qy = grid.mesh(absolute=True)
    # Quadrants centred on the axes map onto each other under a quarter turn
    angle = np.mod(np.arctan2(qy, qx) + np.pi / 4, 2 * np.pi)
    quadrant = (angle // (np.pi / 2)).astype(int)
    totals = np.array([ring_spectrum.values[quadrant == s].sum() for s in range(4)])
    assert totals.max() / totals.min() - 1.0 < 0.02


@pytest.mark.slow
def test_coarser_idler_stride_converges(ring_setup, ring_spectrum):
    crystal, grid, pump = ring_setup
    coarse_bi = build_biphoton(pump, crystal, grid, IdlerSampling(samples_per_axis=64, stride=2, threshold=0.001))
    coarse = angular_spectrum(coarse_bi).normalized("unit-sum").values
    fine = ring_spectrum.normalized("unit-sum").values
    assert np.abs(coarse - fine).sum() < 0.05
    assert ncc(coarse, fine) > 0.99


def test_marginal_image_is_deterministic_across_workers(crystal, crystal_grid, hg_pump, ring_train):
    train = ring_train(crystal, 200.0)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=8),
                        chief_ray_carrier(train, crystal))
    one = marginal_image(bi, train, normalization="raw", workers=1)
    three = marginal_image(bi, train, normalization="raw", workers=3)
    assert np.array_equal(one.values, three.values)
    assert one.metadata["idler_samples"] == len(bi.idler_samples)
    assert 0.0 < one.metadata["transmitted_fraction"] < 1.0


def test_marginal_image_is_the_incoherent_sum_of_components(crystal, crystal_grid, hg_pump, ring_train):
    train = ring_train(crystal, 200.0)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=8),
                        chief_ray_carrier(train, crystal))
    image = marginal_image(bi, train, normalization="raw")
    summed = sum(w * f.intensity() for f, w in image_components(bi, train))
    assert np.allclose(image.values, summed, rtol=1e-12, atol=0.0)


def test_smaller_aperture_transmits_less(crystal, crystal_grid, hg_pump, ring_train):
    wide = ring_train(crystal, 200.0)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=8),
                        chief_ray_carrier(wide, crystal))
    narrow = ring_train(crystal, 100.0)
    assert marginal_image(bi, narrow).metadata["raw_total"] < marginal_image(bi, wide).metadata["raw_total"]


def test_image_grid_follows_the_train(crystal, crystal_grid, hg_pump, ring_train):
    train = ring_train(crystal, 200.0)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=8),
                        chief_ray_carrier(train, crystal))
    image = marginal_image(bi, train)
    assert image.grid.n == crystal_grid.n
    assert image.grid.pitch == pytest.approx(2 * crystal_grid.pitch)
    assert image.normalization == "peak-1"
    assert image.values.max() == pytest.approx(1.0)


@pytest.mark.slow
def test_hg_pump_structure_reaches_the_marginal_image(thin_crystal, crystal_grid, hg_pump, ring_train):
    train = ring_train(thin_crystal, 200.0)
    image = _thin_image(thin_crystal, hg_pump, crystal_grid, train, 32)
    assert ncc(image, _template(hg_pump, crystal_grid, train, image)) >= 0.8


@pytest.mark.slow
@pytest.mark.parametrize("terms,order", [
    ("0:1:1, 0:-1:-1", 2),
    ("0:2:1, 0:-2:1", 4),
    ("0:3:1, 0:-3:1", 6),
])
def test_petal_count_of_vortex_superpositions(thin_crystal, crystal_grid, ring_train, terms, order):
    pump = make_pump(terms, 400.0)
    train = ring_train(thin_crystal, 600.0, z1_m=IMAGE_PLANE_M)
    image = _thin_image(thin_crystal, pump, crystal_grid, train, 40)
    assert dominant_harmonic(azimuthal_harmonics(image)) == order


@pytest.mark.slow
def test_vortex_pump_gives_dark_centre(thin_crystal, crystal_grid, ring_train):
    pump = make_pump("0:1:1", 400.0)
    train = ring_train(thin_crystal, 600.0, z1_m=IMAGE_PLANE_M)
    image = _thin_image(thin_crystal, pump, crystal_grid, train, 40)
    assert central_ratio(image) <= 0.25


@pytest.mark.slow
def test_image_does_not_depend_on_position_on_ring(thin_crystal, crystal_grid, hg_pump, ring_train):
    images = [
        _thin_image(thin_crystal, hg_pump, crystal_grid, ring_train(thin_crystal, 200.0, angle_deg=a), 24)
        for a in (0.0, 90.0, 180.0, 270.0)
    ]
    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            assert ncc(images[i], images[j]) >= 0.8


def test_mean_oam_of_empty_spectrum():
    with pytest.raises(DegenerateImageError):
        mean_oam({0: 0.0, 1: 0.0})


def test_oam_spectrum_of_pure_vortex():
    field = lg_mode(0, 2, 100e-6, Grid2D(128, 5e-6))
    spectrum = oam_spectrum(field, max_order=4)
    assert mean_oam(spectrum) == pytest.approx(2.0, abs=0.01)
    assert max(spectrum, key=spectrum.get) == 2


@pytest.mark.slow
def test_marginal_oam_cancels_while_pump_keeps_it(thin_crystal, crystal_grid, ring_train):
    train = ring_train(thin_crystal, 200.0, z1_m=IMAGE_PLANE_M)
    carrier = chief_ray_carrier(train, thin_crystal)
    sampling = IdlerSampling(samples_per_axis=40)

    means = {}
    for l in (3, -3):
        pump = PumpSpec.single(0, l, 250e-6)
        bi = build_biphoton(pump, thin_crystal, crystal_grid, sampling, carrier, False)
        means[l] = mean_oam(oam_spectrum(image_components(bi, train), max_order=48))
        assert abs(means[l]) <= 0.3

    control = coherent_control(PumpSpec.single(0, 3, 250e-6), thin_crystal, crystal_grid, train)
    assert mean_oam(oam_spectrum(control, max_order=48)) >= 2.7
    assert abs(means[3] + means[-3]) < 0.02


def test_disjoint_idler_sets_add_incoherently(crystal, crystal_grid, hg_pump, ring_train):
    train = ring_train(crystal, 200.0)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=8),
                        chief_ray_carrier(train, crystal))
    half = len(bi.idler_samples) // 2
    first = replace(bi, idler_samples=bi.idler_samples[:half])
    second = replace(bi, idler_samples=bi.idler_samples[half:])

    whole = marginal_image(bi, train, normalization="raw", strict=False)
    parts = [marginal_image(part, train, normalization="raw", strict=False) for part in (first, second)]
    assert np.allclose(whole.values, parts[0].values + parts[1].values,
                       rtol=1e-10, atol=1e-12 * whole.values.max())
    assert whole.metadata["raw_total"] == pytest.approx(
        parts[0].metadata["raw_total"] + parts[1].metadata["raw_total"], rel=1e-10
    )


def test_spike_pump_pairs_each_idler_with_one_signal_momentum(crystal, crystal_grid, hg_pump, ring_train):
    carrier = chief_ray_carrier(ring_train(crystal, 200.0), crystal)
    bi = build_biphoton(hg_pump, crystal, crystal_grid, IdlerSampling(samples_per_axis=16), carrier)
    c = crystal_grid.n // 2
    spike = np.zeros_like(bi.pump_spectrum)
    spike[c, c] = 1.0
    plane_wave = replace(bi, pump_spectrum=spike)

    qx, qy = plane_wave.signal_grid.mesh(absolute=True)
    for i, sample in enumerate(plane_wave.idler_samples):
        values = plane_wave.signal_field(i).values
        rows, cols = np.nonzero(values)
        assert len(rows) == 1
        # q_s + q_i = 0 on the single lit pixel
        assert qx[rows[0], cols[0]] == pytest.approx(-sample.momentum[0], abs=1e-6 * bi.signal_grid.pitch)
        assert qy[rows[0], cols[0]] == pytest.approx(-sample.momentum[1], abs=1e-6 * bi.signal_grid.pitch)


def test_single_idler_spectrum_is_the_translated_pump(thin_crystal, crystal_grid, hg_pump, ring_train):
    carrier = chief_ray_carrier(ring_train(thin_crystal, 200.0), thin_crystal)
    bi = build_biphoton(hg_pump, thin_crystal, crystal_grid, IdlerSampling(samples_per_axis=16), carrier, False)
    strongest = max(range(len(bi.idler_samples)), key=lambda i: bi.signal_field(i).power())
    sample = bi.idler_samples[strongest]

    spectrum = angular_spectrum(replace(bi, idler_samples=[sample]))
    translated = np.abs(bi.pump_at_sum(sample)) ** 2
    assert ncc(spectrum, translated) >= 0.999


@pytest.mark.slow
def test_mirrored_pump_mirrors_the_oam_spectrum(thin_crystal, crystal_grid, ring_train):
    train = ring_train(thin_crystal, 200.0, z1_m=IMAGE_PLANE_M)
    carrier = chief_ray_carrier(train, thin_crystal)
    # odd block keeps the idler lattice symmetric under x -> -x
    sampling = IdlerSampling(samples_per_axis=39)

    spectra = {}
    for l in (3, -3):
        bi = build_biphoton(PumpSpec.single(0, l, 250e-6), thin_crystal, crystal_grid, sampling, carrier, False)
        spectra[l] = oam_spectrum(image_components(bi, train), max_order=16)

    total = sum(spectra[3].values())
    mismatch = sum(abs(spectra[3][m] - spectra[-3][-m]) for m in spectra[3])
    assert sum(spectra[-3].values()) == pytest.approx(total, rel=0.01)
    assert mismatch <= 0.01 * total
