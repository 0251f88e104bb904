"""
Run configuration: flat dotted key=value files, --set overrides, train
parsing and invariant checks.
"""

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from config.presets import DEFAULT_CONFIG, PRESETS
from config.settings import settings
from src.core.errors import ConfigError, SimulationError
from src.core.grid import Grid2D
from src.optics.crystal import INDEX_MODELS, CrystalParams, refractive_index, ring_position
from src.optics.modes import PumpSpec, PumpTerm
from src.optics.propagation import (
    Aperture,
    ApertureSpec,
    FarField,
    FreeSpace,
    Lens,
    OpticalTrain,
    ray_transfer_matrix,
    shift_train_for_carrier,
)
from src.spdc.biphoton import IdlerSampling, chief_ray_carrier
from src.utils.logging_config import logger

_UNITS = {"nm": 1e-9, "um": 1e-6, "µm": 1e-6, "mm": 1e-3, "cm": 1e-2, "m": 1.0}
_LENGTH = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(nm|um|µm|mm|cm|m)?\s*$")


def parse_length(text: str) -> float:
    """'102.3um' -> 1.023e-4; bare numbers are meters."""
    match = _LENGTH.match(str(text))
    if not match:
        raise ConfigError(f"Cannot parse length '{text}' (expected e.g. 100mm, 102.3um)")
    value, unit = match.groups()
    return float(value) * _UNITS[unit or "m"]


def parse_pump_terms(text: str) -> Tuple[PumpTerm, ...]:
    """'p:l:c, p:l:c' -> PumpTerm tuple; the coefficient defaults to 1."""
    terms = []
    for chunk in str(text).split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"Pump term '{chunk}' must be p:l or p:l:c")
        try:
            terms.append(PumpTerm(p=int(parts[0]), l=int(parts[1]), c=parts[2] if len(parts) == 3 else 1))
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"Invalid pump term '{chunk}': {e}")
    if not terms:
        raise ConfigError("pump.terms is empty")
    return tuple(terms)


def parse_train(text: str, crystal: CrystalParams) -> OpticalTrain:
    """
    Parse 'kind:arg; kind:arg; ...' into an OpticalTrain.

    Elements:
        freespace:<len>, lens:<len>, farfield:<len>,
        aperture:<d> | aperture:<d>@<x>,<y> | aperture:<d>@ring:<deg> | aperture:open

    'ring:<deg>' places the aperture on the signal emission ring in its plane;
    'open' drops the element.
    """
    elements = []
    z = 0.0
    for token in str(text).split(";"):
        token = token.strip()
        if not token:
            continue
        kind, _, arg = token.partition(":")
        kind = kind.strip().lower()
        arg = arg.strip()

        if kind in ("freespace", "farfield"):
            distance = parse_length(arg)
            elements.append(FreeSpace(distance_m=distance) if kind == "freespace" else _far_field(distance))
            z += distance
        elif kind == "lens":
            focal = parse_length(arg)
            if focal == 0:
                raise ConfigError("Lens focal length must be nonzero")
            elements.append(Lens(focal_m=focal))
        elif kind == "aperture":
            if arg.lower() == "open":
                continue
            size, _, where = arg.partition("@")
            diameter = parse_length(size)
            if diameter <= 0:
                raise ConfigError(f"Aperture diameter must be positive: '{token}'")
            where = where.strip()
            if not where:
                center = (0.0, 0.0)
            elif where.lower().startswith("ring:"):
                angle = float(where.split(":", 1)[1])
                center = ring_position(crystal, z, np.radians(angle))
            else:
                xs, _, ys = where.partition(",")
                center = (parse_length(xs), parse_length(ys))
            elements.append(Aperture(spec=ApertureSpec(diameter_m=diameter, center=center)))
        else:
            raise ConfigError(f"Unknown train element '{kind}' in '{token}'")

    if not elements:
        raise ConfigError("Optical train is empty")
    return OpticalTrain(elements=tuple(elements))


def _far_field(distance: float) -> FarField:
    if distance == 0:
        raise ConfigError("Far-field distance must be nonzero")
    return FarField(distance_m=distance)


def _split_list(value):
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSection(_Section):
    n: int
    pitch_um: float


class PumpSection(_Section):
    terms: str
    waist_um: float


class CrystalSection(_Section):
    length_mm: float
    cut_angle_deg: float
    pump_nm: float
    signal_nm: float
    idler_nm: float
    index_model: str


class IdlerSection(_Section):
    samples: int
    stride: int
    threshold: float


class TrainSection(_Section):
    elements: str
    method: Literal["otf", "scaled"]


class BiphotonSection(_Section):
    mismatch_phase: bool


class HolographySection(_Section):
    fork_order: int
    period_px: float
    readout_mm: float


class FocusSection(_Section):
    z1_start_cm: float
    z1_stop_cm: float
    z1_step_cm: float
    diameters_um: Tuple[float, ...]

    @field_validator("diameters_um", mode="before")
    @classmethod
    def split_diameters(cls, v):
        return _split_list(v)


class OutputSection(_Section):
    dir: str
    formats: Tuple[str, ...]

    @field_validator("formats", mode="before")
    @classmethod
    def split_formats(cls, v):
        return _split_list(v)


class RunConfig(_Section):
    """Complete, resolved run configuration."""

    grid: GridSection
    pump: PumpSection
    crystal: CrystalSection
    idler: IdlerSection
    train: TrainSection
    biphoton: BiphotonSection
    holography: HolographySection
    focus: FocusSection
    output: OutputSection
    seed: int = 0
    strict: bool = False

    @classmethod
    def from_flat(cls, flat: Dict[str, Any]) -> "RunConfig":
        """Build from dotted keys; raises ConfigError on type errors."""
        nested: Dict[str, Any] = {}
        for key, value in flat.items():
            section, _, name = key.partition(".")
            if name:
                nested.setdefault(section, {})[name] = value
            else:
                nested[section] = value
        try:
            return cls.model_validate(nested)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"Invalid configuration: {problems}")

    @classmethod
    def default(cls) -> "RunConfig":
        return cls.from_flat(DEFAULT_CONFIG)

    def to_flat(self) -> Dict[str, Any]:
        """Dotted-key view, the manifest and config-file representation."""
        flat = {}
        for section, values in self.model_dump().items():
            if isinstance(values, dict):
                for name, value in values.items():
                    if isinstance(value, (list, tuple)):
                        value = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
                    flat[f"{section}.{name}"] = value
            else:
                flat[section] = values
        return flat

    def with_overrides(self, **flat: Any) -> "RunConfig":
        """Copy with dotted-key overrides (keys use '__' for '.')."""
        merged = self.to_flat()
        merged.update({k.replace("__", "."): v for k, v in flat.items()})
        return RunConfig.from_flat(merged)

    def pump_spec(self) -> PumpSpec:
        return PumpSpec(terms=parse_pump_terms(self.pump.terms), waist_m=self.pump.waist_um * 1e-6)

    def crystal_params(self) -> CrystalParams:
        model = INDEX_MODELS.get(self.crystal.index_model.lower())
        if model is None:
            raise ConfigError(
                f"Unknown index model '{self.crystal.index_model}' (known: {', '.join(INDEX_MODELS)})"
            )
        return CrystalParams(
            length_m=self.crystal.length_mm * 1e-3,
            cut_angle_rad=float(np.radians(self.crystal.cut_angle_deg)),
            pump_wavelength_m=self.crystal.pump_nm * 1e-9,
            signal_wavelength_m=self.crystal.signal_nm * 1e-9,
            idler_wavelength_m=self.crystal.idler_nm * 1e-9,
            index_model=model,
        )

    def crystal_grid(self) -> Grid2D:
        return Grid2D(self.grid.n, self.grid.pitch_um * 1e-6, "position")

    def idler_sampling(self) -> IdlerSampling:
        return IdlerSampling(
            samples_per_axis=self.idler.samples,
            stride=self.idler.stride,
            threshold=self.idler.threshold,
        )

    def optical_train(self, crystal: CrystalParams = None) -> OpticalTrain:
        return parse_train(self.train.elements, crystal or self.crystal_params())

    def z1_range(self) -> List[float]:
        f = self.focus
        values = np.arange(f.z1_start_cm, f.z1_stop_cm + 0.5 * f.z1_step_cm, f.z1_step_cm)
        return [round(float(v), 10) * 1e-2 for v in values]

    def focus_diameters(self) -> List[float]:
        return [d * 1e-6 for d in self.focus.diameters_um]


def load_flat_config(path: Optional[str]) -> Dict[str, Any]:
    """
    Read a key=value config file (dotenv syntax) or a JSON run manifest.
    """
    if not path:
        return {}
    file = Path(path)
    if not file.is_file():
        raise ConfigError(f"Config file not found: {path}")
    if file.suffix.lower() == ".json":
        try:
            data = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed JSON config {path}: {e}")
        return dict(data.get("config", data))
    return {k: v for k, v in dotenv_values(file).items() if v is not None}


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    """['key=value', ...] -> dict; raises ConfigError on malformed pairs."""
    result = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override '{pair}' is not key=value")
        result[key.strip()] = value.strip()
    return result


def build_run_config(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Optional[List[str]] = None,
    out_dir: Optional[str] = None,
    strict: Optional[bool] = None
) -> RunConfig:
    """
    Resolve a RunConfig: defaults (output dir and strict from the
    environment settings), then preset overrides, then the config
    file, then --set pairs, then --out / --strict.

    Raises:
        ConfigError: unknown preset or key, malformed file or value
    """
    flat: Dict[str, Any] = dict(DEFAULT_CONFIG)
    flat["output.dir"] = settings.output_dir
    flat["strict"] = settings.strict
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"Unknown preset '{preset}' (known: {', '.join(PRESETS)})")
        flat.update(PRESETS[preset]["overrides"])

    for source in (load_flat_config(config_path), parse_overrides(overrides)):
        unknown = sorted(set(source) - set(DEFAULT_CONFIG))
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
        flat.update(source)

    if out_dir:
        flat["output.dir"] = out_dir
    if strict:
        flat["strict"] = True

    cfg = RunConfig.from_flat(flat)
    logger.debug(f"Resolved config: {cfg.to_flat()}")
    return cfg


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.field}: {self.message}"


def _aperture_plane_pitches(train: OpticalTrain, grid: Grid2D, wavelength_m: float, method: str) -> List[float]:
    """Sample pitch at each aperture plane for the chosen engine."""
    if method == "otf":
        return [grid.pitch for _ in train.apertures()]
    pitches = []
    pitch = grid.pitch
    run = []
    for el in train.elements:
        if not isinstance(el, Aperture):
            run.append(el)
            continue
        (a, b), _ = ray_transfer_matrix(run)
        if abs(b) > 1e-12:
            pitch = wavelength_m * abs(b) / (grid.n * pitch)
        elif abs(a) > 1e-12:
            pitch = abs(a) * pitch
        pitches.append(pitch)
        run = []
    return pitches


def validate_config(cfg: RunConfig) -> List[Violation]:
    """
    Check every invariant of a resolved config.

    Returns:
        Violations; an empty list means the config is runnable
    """
    violations: List[Violation] = []

    def add(code: str, field: str, message: str):
        violations.append(Violation(code, field, message))

    # Grid
    grid = None
    n = cfg.grid.n
    if n < 16 or n & (n - 1):
        add("domain", "grid.n", f"must be a power of two >= 16, got {n}")
    if not cfg.grid.pitch_um > 0:
        add("domain", "grid.pitch_um", f"must be positive, got {cfg.grid.pitch_um}")
    if not violations:
        grid = cfg.crystal_grid()

    # Pump
    pump_terms = None
    try:
        pump_terms = parse_pump_terms(cfg.pump.terms)
    except ConfigError as e:
        add("config", "pump.terms", e.message)
    if pump_terms is not None and all(t.c == 0 for t in pump_terms):
        add("degenerate-spec", "pump.terms", "all coefficients are zero")
    waist = cfg.pump.waist_um * 1e-6
    if not waist > 0:
        add("domain", "pump.waist_um", f"must be positive, got {cfg.pump.waist_um}")
    elif grid is not None and not 4 * grid.pitch <= waist <= grid.window / 4:
        add(
            "grid-resolution", "pump.waist_um",
            f"{cfg.pump.waist_um} um not in [4*pitch, n*pitch/4] = "
            f"[{4 * grid.pitch * 1e6:g}, {grid.window / 4 * 1e6:g}] um",
        )

    # Crystal
    crystal = None
    try:
        crystal = cfg.crystal_params()
        for name, lam in (("pump_nm", crystal.pump_wavelength_m),
                          ("signal_nm", crystal.signal_wavelength_m),
                          ("idler_nm", crystal.idler_wavelength_m)):
            try:
                refractive_index(crystal.index_model, lam)
            except SimulationError as e:
                add(e.code, f"crystal.{name}", e.message)
    except ConfigError as e:
        add("config", "crystal.index_model", e.message)
    except ValidationError as e:
        for err in e.errors():
            loc = ".".join(str(p) for p in err["loc"]) or "crystal"
            add("domain", f"crystal.{loc}", err["msg"])
        crystal = None

    # Idler sampling
    if cfg.idler.samples < 1:
        add("domain", "idler.samples", f"must be >= 1, got {cfg.idler.samples}")
    if cfg.idler.stride < 1:
        add("domain", "idler.stride", f"must be >= 1, got {cfg.idler.stride}")
    if not 0 < cfg.idler.threshold < 1:
        add("domain", "idler.threshold", f"must be in (0, 1), got {cfg.idler.threshold}")

    # Train
    if crystal is not None:
        try:
            train = cfg.optical_train(crystal)
            if grid is not None:
                k0 = 2.0 * np.pi / crystal.signal_wavelength_m
                carrier = chief_ray_carrier(train, crystal)
                shifted, _ = shift_train_for_carrier(train, carrier, k0)
                pitches = _aperture_plane_pitches(shifted, grid, crystal.signal_wavelength_m, cfg.train.method)
                for ap, pitch in zip(shifted.apertures(), pitches):
                    if ap.diameter_m < 2 * pitch:
                        add(
                            "aperture-resolution", "train.elements",
                            f"aperture {ap.diameter_m * 1e6:g} um is under two pixels "
                            f"({pitch * 1e6:.3g} um at its plane)",
                        )
                    elif max(abs(ap.center[0]), abs(ap.center[1])) > grid.n * pitch / 2:
                        add("domain", "train.elements", f"aperture centre {ap.center} outside the window")
        except (ConfigError, ValidationError) as e:
            add("config", "train.elements", str(e))

    # Holography
    if cfg.holography.period_px < 4:
        add("grating-resolution", "holography.period_px", f"must be >= 4 pixels, got {cfg.holography.period_px}")
    if cfg.holography.readout_mm == 0:
        add("domain", "holography.readout_mm", "must be nonzero")

    # Focus scan
    f = cfg.focus
    if not f.z1_step_cm > 0:
        add("domain", "focus.z1_step_cm", f"must be positive, got {f.z1_step_cm}")
    if not f.z1_stop_cm > f.z1_start_cm:
        add("domain", "focus.z1_stop_cm", "must exceed focus.z1_start_cm")
    if not f.diameters_um or any(d <= 0 for d in f.diameters_um):
        add("domain", "focus.diameters_um", "need one or more positive diameters")

    # Output
    unknown = sorted(set(cfg.output.formats) - {"raw", "pgm", "csv"})
    if unknown:
        add("config", "output.formats", f"unknown formats: {', '.join(unknown)}")
    target = Path(cfg.output.dir).resolve()
    existing = next((p for p in [target, *target.parents] if p.exists()), None)
    if existing is None or not os.access(existing, os.W_OK):
        add("io", "output.dir", f"{cfg.output.dir} is not writable")

    for v in violations:
        logger.debug(f"Config violation {v}")
    return violations
