"""
Preset experiments end to end: artifact sets on small grids, and the
figures of merit at the preset defaults (slow).
"""

import json

import numpy as np
import pandas as pd
import pytest

from config.presets import CLOSE_APERTURE_DIAMETERS_UM, FOCUS_DIAMETERS_UM, PUMP_MODES, RING_ANGLES_DEG
from src.cli.artifacts import read_raw_image
from src.cli.experiments import run_preset
from src.cli.run_config import build_run_config

SMALL_GRID = ["grid.n=64", "grid.pitch_um=32", "pump.waist_um=400", "idler.samples=8", "idler.stride=1"]


def _run(name, tmp_path, overrides=()):
    out = tmp_path / name
    cfg = build_run_config(preset=name, overrides=list(overrides), out_dir=str(out))
    return run_preset(name, cfg), out


def _images(out):
    return {path.stem: read_raw_image(str(path)) for path in sorted(out.glob("*.f64"))}


def test_close_aperture_writes_six_panels(tmp_path):
    result, out = _run("close-aperture", tmp_path, SMALL_GRID)

    images = _images(out)
    expected = ["panel_a_open"] + [
        f"panel_{p}_{d:g}um" for p, d in zip("bcdef", CLOSE_APERTURE_DIAMETERS_UM)
    ]
    assert sorted(images) == sorted(expected)
    assert all(img.shape == (64, 64) for img in images.values())
    assert all(img.max() == pytest.approx(1.0) for img in images.values())

    table = pd.read_csv(out / "close_aperture.csv")
    assert list(table["panel"]) == list("abcdef")
    assert set(result["ncc_by_panel"]) == set("abcdef")

    manifest = json.loads((out / "manifest.json").read_text())
    assert "close_aperture.csv" in manifest["artifacts"]
    assert sum(a.endswith(".pgm") for a in manifest["artifacts"]) == 6


def test_ring_positions_write_eight_images_and_the_ncc_matrix(tmp_path):
    result, out = _run("ring-positions", tmp_path, SMALL_GRID)

    images = _images(out)
    assert sorted(images) == sorted(f"position_{a:03d}deg" for a in RING_ANGLES_DEG)
    assert all(img.shape == (64, 64) for img in images.values())

    table = pd.read_csv(out / "pairwise_ncc.csv")
    assert table.shape == (8, 9)
    matrix = table.drop(columns="position").to_numpy()
    assert np.allclose(np.diag(matrix), 1.0)
    assert np.allclose(matrix, matrix.T)
    off_diagonal = matrix[~np.eye(8, dtype=bool)]
    assert result["min_pairwise_ncc"] == pytest.approx(off_diagonal.min(), abs=1e-8)


def test_focus_scan_writes_curves_and_summary(tmp_path):
    overrides = SMALL_GRID + ["focus.z1_start_cm=8", "focus.z1_stop_cm=32", "focus.z1_step_cm=12"]
    result, out = _run("focus-scan", tmp_path, overrides)

    curves = pd.read_csv(out / "focus_scan.csv")
    assert len(curves) == 3 * len(FOCUS_DIAMETERS_UM)
    assert sorted(curves["z1_cm"].unique()) == pytest.approx([8.0, 20.0, 32.0])

    summary = pd.read_csv(out / "focus_summary.csv")
    assert list(summary["diameter_um"]) == pytest.approx(FOCUS_DIAMETERS_UM)
    assert summary["best_z1_cm"].isin(curves["z1_cm"]).all()
    assert len(result["summary"]) == len(FOCUS_DIAMETERS_UM)

    images = _images(out)
    assert sorted(images) == sorted(f"focus_{d:g}um_best" for d in FOCUS_DIAMETERS_UM)
    assert all(img.shape == (64, 64) for img in images.values())


@pytest.mark.slow
def test_open_aperture_panel_shows_the_ring_not_the_pump(tmp_path):
    result, out = _run("close-aperture", tmp_path)
    assert result["ncc_by_panel"]["a"] < 0.5
    assert all(img.shape == (256, 256) for img in _images(out).values())


@pytest.mark.slow
def test_image_is_the_same_anywhere_on_the_ring(tmp_path):
    result, out = _run("ring-positions", tmp_path)
    assert result["min_pairwise_ncc"] >= 0.9
    assert len(_images(out)) == len(RING_ANGLES_DEG)


@pytest.mark.slow
def test_vortex_pumps_keep_dark_centres_and_petals(tmp_path):
    _, out = _run("pump-modes", tmp_path)
    table = pd.read_csv(out / "pump_modes.csv").set_index("pump")
    assert list(table.index) == list(PUMP_MODES)
    for name in ("LG1", "LG2", "LG3"):
        assert table.loc[name, "central_ratio"] <= 0.1
    for name, petals in (("pm1", 2), ("pm2", 4), ("pm3", 6)):
        assert table.loc[name, "dominant_harmonic"] == petals


@pytest.mark.slow
def test_fork_projection_restores_no_gaussian_from_the_marginal(tmp_path):
    result, out = _run("phase-flatten", tmp_path)
    assert abs(result["marginal_mean_oam"]["vortex3"]) <= 0.1

    table = pd.read_csv(out / "phase_flatten.csv")
    vortex = table[table["case"] == "vortex3"].set_index(["mode", "fork_order"])
    for l in (3, -3):
        assert vortex.loc[("marginal", l), "centre_vs_gaussian_control"] < 0.2
    # the coherent pump itself is flattened by the opposite fork
    assert vortex.loc[("pump_control", -3), "central_ratio"] >= 0.5


@pytest.mark.slow
def test_wider_iris_focuses_farther_with_shallower_depth(tmp_path):
    result, out = _run("focus-scan", tmp_path)
    summary = pd.DataFrame(result["summary"]).sort_values("diameter_um")
    assert list(summary["diameter_um"]) == pytest.approx(sorted(FOCUS_DIAMETERS_UM))

    best = summary["best_z1_cm"].to_numpy()
    depth = summary["depth_of_focus_cm"].to_numpy()
    assert np.all(np.diff(best) >= 0)
    assert best[-1] > 10.0
    assert np.all(np.diff(depth) < 0)
    assert len(pd.read_csv(out / "focus_summary.csv")) == len(FOCUS_DIAMETERS_UM)
