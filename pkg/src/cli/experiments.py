"""
Experiment runners behind the CLI subcommands and presets.
"""

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.presets import (
    APERTURE_DISTANCES_CM,
    CLOSE_APERTURE_DIAMETERS_UM,
    PHASE_FLATTEN_CASES,
    PRESETS,
    PUMP_MODES,
    RING_ANGLES_DEG,
    RING_TRAIN,
)
from config.settings import settings
from src import __version__
from src.analysis.focus import focus_scan, imaging_train, pump_template
from src.analysis.metrics import (
    azimuthal_harmonics,
    central_ratio,
    chief_ray_magnification,
    dominant_harmonic,
    ncc,
    resample_template,
    rms_radius,
    sharpness,
)
from src.cli.artifacts import ArtifactWriter
from src.cli.run_config import RunConfig, parse_pump_terms, parse_train
from src.core.errors import ConfigError, DegenerateImageError
from src.core.grid import Grid2D, IntensityMap
from src.optics.crystal import (
    CrystalParams,
    collinear_phase_matching_angle,
    idler_annulus,
    ring_position,
    ring_radius,
)
from src.optics.modes import PumpSpec, pump_intensity
from src.optics.propagation import (
    Aperture,
    ApertureSpec,
    Lens,
    OpticalTrain,
    axial_distance_to_first_aperture,
)
from src.spdc.biphoton import (
    angular_spectrum,
    build_biphoton,
    chief_ray_carrier,
    coherent_control,
    image_components,
    marginal_image,
    mean_oam,
    oam_spectrum,
)
from src.spdc.holography import diffract_first_order, fork_hologram
from src.utils.logging_config import logger


@dataclass
class RunContext:
    """Domain objects resolved from a RunConfig."""

    cfg: RunConfig
    crystal: CrystalParams
    grid: Grid2D
    pump: PumpSpec
    train: OpticalTrain

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "RunContext":
        crystal = cfg.crystal_params()
        return cls(cfg, crystal, cfg.crystal_grid(), cfg.pump_spec(), cfg.optical_train(crystal))

    @property
    def method(self) -> str:
        return self.cfg.train.method

    def with_pump(self, terms: str) -> PumpSpec:
        return PumpSpec(terms=parse_pump_terms(terms), waist_m=self.pump.waist_m)

    def derived(self) -> Dict[str, Any]:
        q_lo, q_hi = idler_annulus(self.crystal, self.cfg.idler.threshold)
        return {
            "collinear_phase_matching_deg": float(np.degrees(collinear_phase_matching_angle(self.crystal))),
            "ring_radius_rad_per_m": ring_radius(self.crystal),
            "idler_annulus_rad_per_m": [q_lo, q_hi],
            "carrier_rad_per_m": list(chief_ray_carrier(self.train, self.crystal)),
            "chief_ray_magnification": chief_ray_magnification(self.train),
            "train": self.train.describe(),
        }


def replace_aperture(train: OpticalTrain, spec: Optional[ApertureSpec]) -> OpticalTrain:
    """Swap the first aperture for `spec`, or drop it when spec is None."""
    elements = []
    replaced = False
    for el in train.elements:
        if isinstance(el, Aperture) and not replaced:
            replaced = True
            if spec is not None:
                elements.append(Aperture(spec=spec))
        else:
            elements.append(el)
    if not replaced:
        raise ConfigError("Train has no aperture to vary")
    return OpticalTrain(elements=tuple(elements))


def _first_aperture(train: OpticalTrain) -> ApertureSpec:
    apertures = train.apertures()
    if not apertures:
        raise ConfigError("This experiment needs an aperture in train.elements")
    return apertures[0]


def _focal_length(train: OpticalTrain) -> float:
    for el in train.elements:
        if isinstance(el, Lens):
            return el.focal_m
    raise ConfigError("This experiment needs a lens in train.elements")


def image_through(
    ctx: RunContext,
    train: OpticalTrain,
    pump: PumpSpec = None,
    workers: Optional[int] = None
) -> Tuple[IntensityMap, IntensityMap, float]:
    """Marginal image, scaled pump template and their NCC for one train."""
    pump = pump or ctx.pump
    carrier = chief_ray_carrier(train, ctx.crystal)
    bi = build_biphoton(
        pump, ctx.crystal, ctx.grid, ctx.cfg.idler_sampling(), carrier,
        ctx.cfg.biphoton.mismatch_phase, ctx.cfg.strict,
    )
    image = marginal_image(bi, train, ctx.method, workers=workers, strict=ctx.cfg.strict)
    template = pump_template(pump, ctx.grid, train, image.grid)
    try:
        score = ncc(image, template)
    except DegenerateImageError:
        logger.warning("Image or template is constant; NCC undefined")
        score = float("nan")
    return image, template.normalized("peak-1"), score


def run_simulate(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Marginal image for the configured pump and train."""
    image, template, score = image_through(ctx, ctx.train)
    writer.write_image("marginal", image)
    writer.write_image("template", template)
    writer.write_table("summary", pd.DataFrame([{
        "ncc": score,
        "sharpness": sharpness(image),
        "transmitted_fraction": image.metadata.get("transmitted_fraction"),
        "idler_samples": image.metadata.get("idler_samples"),
        "image_pitch_m": image.grid.pitch,
    }]))
    return {"ncc": score, "sharpness": sharpness(image)}


def run_ring(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Angular spectrum and the open-aperture image of the emission ring."""
    bi = build_biphoton(
        ctx.pump, ctx.crystal, ctx.grid, ctx.cfg.idler_sampling(), (0.0, 0.0),
        ctx.cfg.biphoton.mismatch_phase, ctx.cfg.strict,
    )
    spectrum = angular_spectrum(bi)
    image = marginal_image(bi, ctx.train, ctx.method, strict=ctx.cfg.strict)
    writer.write_image("angular_spectrum", spectrum)
    writer.write_image("ring_image", image)

    k0 = 2.0 * np.pi / ctx.crystal.signal_wavelength_m
    harmonics = azimuthal_harmonics(spectrum, (0.0, 0.0))
    uniformity = harmonics[0] / sum(harmonics.values())
    writer.write_table("ring", pd.DataFrame([{
        "ring_radius_rad_per_m": ring_radius(ctx.crystal),
        "ring_half_angle_rad": ring_radius(ctx.crystal) / k0,
        "m0_power_fraction": uniformity,
        "idler_samples": len(bi.idler_samples),
    }]))
    return {"m0_power_fraction": uniformity}


def _ring_panel_config(ctx: RunContext) -> RunContext:
    """Open-aperture context on a grid whose momentum window holds the ring."""
    _, q_hi = idler_annulus(ctx.crystal, ctx.cfg.idler.threshold)
    pitch = np.pi / (1.25 * q_hi)
    grid = Grid2D(ctx.grid.n, pitch, "position")
    waist = min(ctx.pump.waist_m, grid.window / 4)
    if waist < ctx.pump.waist_m:
        logger.warning(
            f"Open-aperture panel: pump waist clamped to {waist * 1e6:.1f} um to fit the ring grid"
        )
    samples = int(2 * np.ceil(q_hi / (2.0 * np.pi / grid.window)) + 2)
    cfg = ctx.cfg.with_overrides(idler__samples=samples, grid__pitch_um=pitch * 1e6)
    pump = PumpSpec(terms=ctx.pump.terms, waist_m=waist)
    return RunContext(cfg, ctx.crystal, grid, pump, parse_train(RING_TRAIN, ctx.crystal))


def run_close_aperture(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Panels (a)-(f): open ring, then the iris closing to its minimum."""
    base = _first_aperture(ctx.train)
    rows = []

    ring_ctx = _ring_panel_config(ctx)
    carrier = (0.0, 0.0)
    bi = build_biphoton(
        ring_ctx.pump, ctx.crystal, ring_ctx.grid, ring_ctx.cfg.idler_sampling(), carrier,
        ctx.cfg.biphoton.mismatch_phase, ctx.cfg.strict,
    )
    open_image = marginal_image(bi, ring_ctx.train, ctx.method, strict=ctx.cfg.strict)
    writer.write_image("panel_a_open", open_image)
    template = IntensityMap(ring_ctx.grid, pump_intensity(ring_ctx.pump, ring_ctx.grid))
    open_template = resample_template(template, chief_ray_magnification(ctx.train), open_image.grid)
    rows.append({"panel": "a", "diameter_um": float("inf"), "ncc": ncc(open_image, open_template)})

    for panel, d_um in zip("bcdef", CLOSE_APERTURE_DIAMETERS_UM):
        train = replace_aperture(ctx.train, ApertureSpec(diameter_m=d_um * 1e-6, center=base.center))
        image, _, score = image_through(ctx, train)
        writer.write_image(f"panel_{panel}_{d_um:g}um", image)
        rows.append({"panel": panel, "diameter_um": d_um, "ncc": score})

    writer.write_table("close_aperture", pd.DataFrame(rows))
    return {"ncc_by_panel": {r["panel"]: r["ncc"] for r in rows}}


def run_ring_positions(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Iris at eight azimuths on the ring; pairwise NCC matrix."""
    base = _first_aperture(ctx.train)
    z = axial_distance_to_first_aperture(ctx.train)
    images = []
    for angle in RING_ANGLES_DEG:
        centre = ring_position(ctx.crystal, z, np.radians(angle))
        train = replace_aperture(ctx.train, ApertureSpec(diameter_m=base.diameter_m, center=centre))
        image, _, _ = image_through(ctx, train)
        writer.write_image(f"position_{angle:03d}deg", image)
        images.append(image)

    labels = [f"{a}deg" for a in RING_ANGLES_DEG]
    matrix = np.array([[ncc(a, b) for b in images] for a in images])
    table = pd.DataFrame(matrix, columns=labels)
    table.insert(0, "position", labels)
    writer.write_table("pairwise_ncc", table)
    off_diagonal = matrix[~np.eye(len(images), dtype=bool)]
    return {"min_pairwise_ncc": float(off_diagonal.min())}


def run_pump_modes(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Vortex pumps and their +/- superpositions through the small iris."""
    rows = []
    for name, terms in PUMP_MODES.items():
        pump = ctx.with_pump(terms)
        image, template, score = image_through(ctx, ctx.train, pump)
        writer.write_image(f"mode_{name}", image)
        harmonics = azimuthal_harmonics(image)
        rows.append({
            "pump": name,
            "terms": terms,
            "ncc": score,
            "central_ratio": central_ratio(image, radius_px=0, at_centroid=True),
            "dominant_harmonic": dominant_harmonic(harmonics),
        })
    writer.write_table("pump_modes", pd.DataFrame(rows))
    return {"modes": rows}


def run_phase_flatten(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """
    Fork-hologram readout of Gaussian- and vortex-pumped images plus coherent controls.

    Every readout is compared on axis against the coherent Gaussian pump
    through the plain grating, per unit power reaching the hologram.
    """
    holo_cfg = ctx.cfg.holography
    readout = holo_cfg.readout_mm * 1e-3
    rows = []
    oam = {}

    for case, spec in PHASE_FLATTEN_CASES.items():
        pump = ctx.with_pump(spec["pump"])
        carrier = chief_ray_carrier(ctx.train, ctx.crystal)
        bi = build_biphoton(
            pump, ctx.crystal, ctx.grid, ctx.cfg.idler_sampling(), carrier,
            ctx.cfg.biphoton.mismatch_phase, ctx.cfg.strict,
        )
        components = image_components(bi, ctx.train, ctx.method)
        control = coherent_control(pump, ctx.crystal, ctx.grid, ctx.train, ctx.method, carrier)
        image_grid = control.coherent_fields[0][0].grid
        oam[case] = mean_oam(oam_spectrum(components))

        for l in spec["forks"]:
            holo = fork_hologram(l, holo_cfg.period_px * image_grid.pitch, image_grid)
            for mode, source in (("marginal", components), ("pump_control", control)):
                readout_image = diffract_first_order(source, holo, readout, normalization="raw")
                writer.write_image(f"flatten_{case}_fork{l:+d}_{mode}", readout_image)
                rows.append({
                    "case": case,
                    "fork_order": l,
                    "mode": mode,
                    "centre_brightness": readout_image.metadata["centre_brightness"],
                    "central_ratio": central_ratio(readout_image, radius_px=0),
                    "window_fraction": readout_image.metadata["window_fraction"],
                    "marginal_mean_oam": oam[case],
                })

    table = pd.DataFrame(rows)
    reference = table[
        (table["case"] == "gaussian") & (table["fork_order"] == 0) & (table["mode"] == "pump_control")
    ]["centre_brightness"]
    if len(reference) and reference.iloc[0] > 0:
        table["centre_vs_gaussian_control"] = table["centre_brightness"] / reference.iloc[0]
    else:
        logger.warning("No Gaussian pump control in the phase-flattening cases; skipping the on-axis ratio")
    writer.write_table("phase_flatten", table)
    return {"marginal_mean_oam": oam, "cases": table.to_dict("records")}


def run_focus_scan(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Best image plane and depth of focus versus iris diameter."""
    base = _first_aperture(ctx.train)
    z0 = axial_distance_to_first_aperture(ctx.train)
    angle = float(np.arctan2(base.center[1], base.center[0]))
    results = focus_scan(
        ctx.pump, ctx.crystal, ctx.cfg.focus_diameters(), ctx.cfg.z1_range(), ctx.grid,
        ctx.cfg.idler_sampling(), z0, _focal_length(ctx.train), angle, ctx.method,
        ctx.cfg.biphoton.mismatch_phase, keep_images=True,
    )

    curve_rows, summary_rows = [], []
    for result in results:
        d_um = result.aperture_diameter_m * 1e6
        for (z1, score), (_, sharp) in zip(result.metric_curve, result.sharpness_curve):
            curve_rows.append({"diameter_um": d_um, "z1_cm": z1 * 100, "ncc": score, "sharpness": sharp})
        best = result.z1_samples.index(result.best_z1)
        writer.write_image(f"focus_{d_um:g}um_best", result.images[best])
        summary_rows.append({
            "diameter_um": d_um,
            "best_z1_cm": result.best_z1 * 100,
            "depth_of_focus_cm": result.depth_of_focus * 100,
        })

    writer.write_table("focus_scan", pd.DataFrame(curve_rows))
    writer.write_table("focus_summary", pd.DataFrame(summary_rows))
    return {"summary": summary_rows}


def run_aperture_distance(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """Image scale versus crystal-to-iris distance."""
    base = _first_aperture(ctx.train)
    focal = _focal_length(ctx.train)
    angle = float(np.arctan2(base.center[1], base.center[0]))
    pump_rms = rms_radius(IntensityMap(ctx.grid, pump_intensity(ctx.pump, ctx.grid)))
    rows = []
    for z0_cm in APERTURE_DISTANCES_CM:
        z0 = z0_cm * 1e-2
        centre = ring_position(ctx.crystal, z0, angle)
        train = imaging_train(z0, focal, focal, ApertureSpec(diameter_m=base.diameter_m, center=centre))
        image, _, score = image_through(ctx, train)
        writer.write_image(f"distance_{z0_cm:g}cm", image)
        rows.append({
            "z0_cm": z0_cm,
            "predicted_magnification": abs(chief_ray_magnification(train)),
            "measured_magnification": rms_radius(image) / pump_rms,
            "ncc": score,
        })
    writer.write_table("aperture_distance", pd.DataFrame(rows))
    return {"rows": rows}


def run_fork_readout(ctx: RunContext, writer: ArtifactWriter) -> Dict[str, Any]:
    """One fork order (holography.fork_order) read out for the configured pump."""
    holo_cfg = ctx.cfg.holography
    carrier = chief_ray_carrier(ctx.train, ctx.crystal)
    bi = build_biphoton(
        ctx.pump, ctx.crystal, ctx.grid, ctx.cfg.idler_sampling(), carrier,
        ctx.cfg.biphoton.mismatch_phase, ctx.cfg.strict,
    )
    components = image_components(bi, ctx.train, ctx.method)
    control = coherent_control(ctx.pump, ctx.crystal, ctx.grid, ctx.train, ctx.method, carrier)
    image_grid = control.coherent_fields[0][0].grid
    holo = fork_hologram(holo_cfg.fork_order, holo_cfg.period_px * image_grid.pitch, image_grid)

    rows = []
    for mode, source in (("marginal", components), ("pump_control", control)):
        image = diffract_first_order(source, holo, holo_cfg.readout_mm * 1e-3, normalization="raw")
        writer.write_image(f"fork{holo.order:+d}_{mode}", image)
        rows.append({
            "fork_order": holo.order,
            "mode": mode,
            "central_ratio": central_ratio(image, radius_px=0),
            "window_fraction": image.metadata.get("window_fraction"),
        })
    writer.write_table("fork_readout", pd.DataFrame(rows))
    return {"rows": rows, "marginal_mean_oam": mean_oam(oam_spectrum(components))}


RUNNERS: Dict[str, Callable[[RunContext, ArtifactWriter], Dict[str, Any]]] = {
    "simulate": run_simulate,
    "fork_readout": run_fork_readout,
    "ring": run_ring,
    "close_aperture": run_close_aperture,
    "ring_positions": run_ring_positions,
    "pump_modes": run_pump_modes,
    "phase_flatten": run_phase_flatten,
    "focus_scan": run_focus_scan,
    "aperture_distance": run_aperture_distance,
}


def run_experiment(runner: str, cfg: RunConfig, command: str) -> Dict[str, Any]:
    """
    Resolve the config, run one experiment and write its manifest.

    Returns:
        Summary dictionary (also stored under 'derived' in the manifest)
    """
    if runner not in RUNNERS:
        raise ConfigError(f"Unknown experiment '{runner}'")
    ctx = RunContext.from_config(cfg)
    writer = ArtifactWriter(cfg.output.dir, cfg.output.formats)
    logger.info(f"Running {command} -> {cfg.output.dir} (workers={settings.workers}, strict={cfg.strict})")

    summary = RUNNERS[runner](ctx, writer)
    derived = ctx.derived()
    derived["results"] = summary
    writer.write_manifest(command, cfg.to_flat(), derived, __version__)
    return summary


def run_preset(name: str, cfg: RunConfig) -> Dict[str, Any]:
    """Run a named preset; cfg must already include the preset overrides."""
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset '{name}' (known: {', '.join(PRESETS)})")
    return run_experiment(PRESETS[name]["runner"], cfg, f"preset {name}")
