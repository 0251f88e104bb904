"""
Config parsing and validation, artifact writers and the command-line entry point.
"""

import json

import numpy as np
import pandas as pd
import pytest

from config.presets import DEFAULT_CONFIG
from src.cli import main as cli_main
from src.cli.artifacts import ArtifactWriter, read_raw_image
from src.cli.experiments import replace_aperture, run_preset
from src.cli.run_config import (
    RunConfig,
    build_run_config,
    parse_length,
    parse_overrides,
    parse_pump_terms,
    parse_train,
    validate_config,
)
from src.core.errors import ConfigError
from src.core.grid import Grid2D, IntensityMap
from src.optics.crystal import ring_position
from src.optics.propagation import Aperture, ApertureSpec, FarField, Lens

SMALL_RUN = [
    "--set", "grid.n=64",
    "--set", "grid.pitch_um=32",
    "--set", "pump.waist_um=400",
    "--set", "idler.samples=8",
]


@pytest.mark.parametrize("text,expected", [
    ("102.3um", 102.3e-6),
    ("100mm", 0.1),
    ("5 cm", 0.05),
    ("810nm", 810e-9),
    ("0.25", 0.25),
])
def test_parse_length(text, expected):
    assert parse_length(text) == pytest.approx(expected)


def test_parse_length_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_length("ten mm")


def test_parse_pump_terms():
    terms = parse_pump_terms("0:1, 0:-1:-1")
    assert [(t.p, t.l, t.c) for t in terms] == [(0, 1, 1), (0, -1, -1)]
    with pytest.raises(ConfigError):
        parse_pump_terms("0")
    with pytest.raises(ConfigError):
        parse_pump_terms(" , ")


def test_parse_train_elements(crystal):
    train = parse_train("farfield:50mm; aperture:open; aperture:100um@ring:90; lens:100mm", crystal)
    assert len(train.elements) == 3
    assert isinstance(train.elements[0], FarField)
    assert isinstance(train.elements[2], Lens)
    centre = train.apertures()[0].center
    assert centre == pytest.approx(ring_position(crystal, 0.05, np.pi / 2))

    offset = parse_train("freespace:1cm; aperture:1mm@1mm,-2mm", crystal)
    assert offset.apertures()[0].center == pytest.approx((1e-3, -2e-3))


@pytest.mark.parametrize("text", ["mirror:10mm", "farfield:0mm", "lens:0", "aperture:open", ""])
def test_parse_train_rejects(crystal, text):
    with pytest.raises(ConfigError):
        parse_train(text, crystal)


def test_parse_overrides():
    assert parse_overrides(["a.b=1", " c = x=y "]) == {"a.b": "1", "c": "x=y"}
    with pytest.raises(ConfigError):
        parse_overrides(["novalue"])


def test_default_config_is_valid(tmp_path):
    cfg = build_run_config(out_dir=str(tmp_path))
    assert validate_config(cfg) == []
    assert set(cfg.to_flat()) == set(DEFAULT_CONFIG)


def test_zero_waist_is_reported(tmp_path):
    cfg = build_run_config(overrides=["pump.waist_um=0"], out_dir=str(tmp_path))
    fields = [v.field for v in validate_config(cfg)]
    assert "pump.waist_um" in fields


def test_unresolved_aperture_is_reported(tmp_path):
    train = "farfield:50mm; aperture:5um@ring:90; freespace:100mm; lens:100mm; freespace:100mm"
    cfg = build_run_config(overrides=[f"train.elements={train}"], out_dir=str(tmp_path))
    codes = [v.code for v in validate_config(cfg)]
    assert "aperture-resolution" in codes


def test_small_grating_period_is_reported(tmp_path):
    cfg = build_run_config(overrides=["holography.period_px=2"], out_dir=str(tmp_path))
    assert [v.code for v in validate_config(cfg)] == ["grating-resolution"]


def test_unknown_key_and_preset():
    with pytest.raises(ConfigError):
        build_run_config(overrides=["grid.size=64"])
    with pytest.raises(ConfigError):
        build_run_config(preset="no-such-preset")


def test_preset_overrides_apply(tmp_path):
    cfg = build_run_config(preset="ring", out_dir=str(tmp_path))
    assert cfg.pump.terms == "0:0:1"
    assert cfg.grid.pitch_um == pytest.approx(3.5)


def test_focus_range_brackets_both_image_planes(tmp_path):
    z1 = build_run_config(out_dir=str(tmp_path)).z1_range()
    assert z1[0] == pytest.approx(0.06)
    assert z1[-1] == pytest.approx(0.32)
    assert any(z == pytest.approx(0.10) for z in z1)
    assert any(z == pytest.approx(0.30) for z in z1)

    scan = build_run_config(preset="focus-scan", out_dir=str(tmp_path)).z1_range()
    assert scan[0] == pytest.approx(0.06)
    assert scan[-1] == pytest.approx(1.98)
    assert len(scan) == 97


def test_config_file_then_set_precedence(tmp_path):
    path = tmp_path / "run.env"
    path.write_text("idler.samples=12\npump.waist_um=500\n", encoding="utf-8")
    cfg = build_run_config(config_path=str(path), overrides=["idler.samples=16"], strict=True)
    assert cfg.idler.samples == 16
    assert cfg.pump.waist_um == 500.0
    assert cfg.strict is True


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        build_run_config(config_path=str(tmp_path / "absent.env"))


def test_with_overrides_and_derived_values():
    cfg = RunConfig.default().with_overrides(idler__samples=8, focus__z1_step_cm=1.0)
    assert cfg.idler.samples == 8
    z1 = cfg.z1_range()
    assert z1[0] == pytest.approx(0.06)
    assert z1[-1] == pytest.approx(0.32)
    assert len(z1) == 27
    assert cfg.focus_diameters()[0] == pytest.approx(102.3e-6)


def test_bad_value_type_is_a_config_error():
    with pytest.raises(ConfigError):
        RunConfig.default().with_overrides(grid__n="many")


def test_replace_aperture(crystal):
    train = parse_train("farfield:50mm; aperture:100um; lens:100mm", crystal)
    wider = replace_aperture(train, ApertureSpec(diameter_m=300e-6))
    assert wider.apertures()[0].diameter_m == pytest.approx(300e-6)
    assert replace_aperture(train, None).apertures() == []
    with pytest.raises(ConfigError):
        replace_aperture(parse_train("lens:100mm", crystal), None)


def test_run_preset_rejects_unknown_name():
    with pytest.raises(ConfigError):
        run_preset("no-such-preset", RunConfig.default())


def test_image_artifacts(tmp_path):
    grid = Grid2D(16, 2e-6)
    values = np.arange(256, dtype=float).reshape(16, 16)
    writer = ArtifactWriter(str(tmp_path / "out"), ("raw", "pgm", "csv"))
    writer.write_image("img", IntensityMap(grid, values))

    assert np.array_equal(read_raw_image(str(tmp_path / "out" / "img.f64")), values)
    header = (tmp_path / "out" / "img.hdr").read_text(encoding="utf-8")
    assert "n=16" in header
    assert "byte_order=little" in header

    pgm = (tmp_path / "out" / "img.pgm").read_bytes()
    prefix = b"P5\n16 16\n255\n"
    assert pgm.startswith(prefix)
    assert len(pgm) == len(prefix) + 256
    assert pgm[-1] == 255


def test_table_and_manifest(tmp_path):
    writer = ArtifactWriter(str(tmp_path), ("csv",))
    writer.write_image("skipped", IntensityMap(Grid2D(16, 1.0), np.ones((16, 16))))
    writer.write_table("rows", pd.DataFrame([{"a": 1, "b": 0.5}]))
    path = writer.write_manifest("simulate", {"seed": 0}, {"x": np.float64(1.5), "c": 1 + 2j}, "0.1.0")

    manifest = json.loads(path.read_text(encoding="utf-8"))
    assert manifest["artifacts"] == ["rows.csv"]
    assert manifest["derived"] == {"x": 1.5, "c": [1.0, 2.0]}
    assert manifest["command"] == "simulate"
    assert pd.read_csv(tmp_path / "rows.csv").to_dict("records") == [{"a": 1, "b": 0.5}]


def test_validate_exit_codes(tmp_path, capsys):
    assert cli_main.main(["validate", "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["valid"] is True

    assert cli_main.main(["validate", "--out", str(tmp_path), "--set", "pump.waist_um=0"]) == 2
    assert cli_main.main(["validate", "--set", "grid.size=64"]) == 2


def test_runtime_failure_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli_main, "run_experiment", boom)
    assert cli_main.main(["simulate", "--out", str(tmp_path)]) == 1


def test_unknown_preset_is_rejected_by_parser():
    with pytest.raises(SystemExit):
        cli_main.main(["preset", "no-such-preset"])


def test_simulate_end_to_end_and_rerun_from_manifest(tmp_path):
    first = tmp_path / "first"
    assert cli_main.main(["simulate", "--out", str(first), *SMALL_RUN]) == 0

    for name in ("marginal.f64", "marginal.hdr", "marginal.pgm", "template.f64", "summary.csv", "manifest.json"):
        assert (first / name).is_file()
    manifest = json.loads((first / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["grid.n"] == 64
    assert manifest["derived"]["chief_ray_magnification"] == pytest.approx(-2.0)
    assert "marginal.f64" in manifest["artifacts"]

    second = tmp_path / "second"
    assert cli_main.main(["simulate", "--config", str(first / "manifest.json"), "--out", str(second)]) == 0
    assert (first / "marginal.f64").read_bytes() == (second / "marginal.f64").read_bytes()
