"""
Experiment constants and preset definitions.
"""

# Laboratory geometry
APERTURE_DISTANCE_M = 0.05      # crystal to iris
FOCAL_LENGTH_M = 0.10           # plano-convex imaging lens
DETECTOR_DISTANCE_M = 0.10      # lens to camera (2f plane)
DETECTOR_PIXELS = 512
DETECTOR_PITCH_M = 16e-6

# Iris diameters of the focus study
FOCUS_DIAMETERS_UM = [102.3, 132.5, 174.4, 246.4]

# Iris sweep of the closing-aperture sequence, panels (b)-(f)
CLOSE_APERTURE_DIAMETERS_UM = [1000.0, 500.0, 246.4, 174.4, 102.3]

# Azimuths on the emission ring for the position study
RING_ANGLES_DEG = [0, 45, 90, 135, 180, 225, 270, 315]

# Pumps of the mode matrix
PUMP_MODES = {
    "LG1": "0:1:1",
    "LG2": "0:2:1",
    "LG3": "0:3:1",
    "pm1": "0:1:1, 0:-1:-1",
    "pm2": "0:2:1, 0:-2:1",
    "pm3": "0:3:1, 0:-3:1",
}

# Pump / fork pairings of the phase-flattening study
PHASE_FLATTEN_CASES = {
    "gaussian": {"pump": "0:0:1", "forks": [0, 1, -1]},
    "vortex3": {"pump": "0:3:1", "forks": [0, 3, -3]},
}

# Aperture distances of the magnification study
APERTURE_DISTANCES_CM = [3.0, 5.0, 7.0]

DEFAULT_TRAIN = (
    "farfield:50mm; aperture:102.3um@ring:90; "
    "freespace:100mm; lens:100mm; freespace:100mm"
)

RING_TRAIN = "freespace:50mm; freespace:100mm; lens:100mm; freespace:100mm"

# Narrow iris for the phase-flattening study
PHASE_FLATTEN_TRAIN = (
    "farfield:50mm; aperture:30um@ring:90; "
    "freespace:100mm; lens:100mm; freespace:100mm"
)

# Wide collimated pump on a coarse crystal grid. The imaging blur of the
# small iris (a few hundred microns at the crystal) stays well under the
# mode structure; the idler block still spans the iris plus the pump spectrum.
WIDE_PUMP = {
    "grid.pitch_um": 64.0,
    "pump.waist_um": 3000.0,
    "idler.samples": 19,
    "idler.stride": 3,
}

# Flat run configuration defaults (dotted keys as in config files)
DEFAULT_CONFIG = {
    "grid.n": 256,
    "grid.pitch_um": 16.0,
    "pump.terms": "0:1:1, 0:-1:-1",
    "pump.waist_um": 800.0,
    "crystal.length_mm": 5.0,
    "crystal.cut_angle_deg": 29.97,
    "crystal.pump_nm": 405.0,
    "crystal.signal_nm": 810.0,
    "crystal.idler_nm": 810.0,
    "crystal.index_model": "bbo",
    "idler.samples": 32,
    "idler.stride": 1,
    "idler.threshold": 0.05,
    "train.elements": DEFAULT_TRAIN,
    "train.method": "scaled",
    "biphoton.mismatch_phase": True,
    "holography.fork_order": 0,
    "holography.period_px": 8,
    "holography.readout_mm": 100.0,
    # 6-32 cm rather than 6-20 cm: the scan brackets both 2f (10 cm) and the
    # geometric image plane f(1 + f/z0) = 30 cm, where the widest irises focus
    "focus.z1_start_cm": 6.0,
    "focus.z1_stop_cm": 32.0,
    "focus.z1_step_cm": 0.5,
    "focus.diameters_um": ",".join(f"{d:g}" for d in FOCUS_DIAMETERS_UM),
    "output.dir": "./output",
    "output.formats": "raw,pgm,csv",
    "seed": 0,
    "strict": False,
}

# Preset definitions: runner plus config overrides
PRESETS = {
    "ring": {
        "runner": "ring",
        "description": "SPDC emission ring: angular spectrum and open-aperture image",
        "overrides": {
            "grid.pitch_um": 3.5,
            "pump.terms": "0:0:1",
            "pump.waist_um": 100.0,
            "idler.samples": 256,
            "train.elements": RING_TRAIN,
        },
    },
    "close-aperture": {
        "runner": "close_aperture",
        "description": "HG1 pump imaged while the iris closes from open to minimum",
        "overrides": {"idler.samples": 128},
    },
    "ring-positions": {
        "runner": "ring_positions",
        "description": "Iris at eight azimuths on the ring, pairwise image NCC",
        "overrides": dict(WIDE_PUMP),
    },
    "pump-modes": {
        "runner": "pump_modes",
        "description": "Vortex pumps of orders 1-3 and their +/- superpositions",
        "overrides": dict(WIDE_PUMP),
    },
    "phase-flatten": {
        "runner": "phase_flatten",
        "description": "Fork-hologram projection of Gaussian- and vortex-pumped images",
        "overrides": {
            **WIDE_PUMP,
            "idler.samples": 15,
            "idler.stride": 2,
            "train.elements": PHASE_FLATTEN_TRAIN,
        },
    },
    "focus-scan": {
        "runner": "focus_scan",
        "description": "Best image plane versus iris diameter",
        # The scan runs on past 1 m: below 250 um the iris keeps the image within
        # 0.9 of its best NCC over the whole 6-32 cm range, so the depth of
        # focus only closes on the far side of the 30 cm image plane.
        "overrides": {
            "pump.terms": "0:2:1, 0:-2:1",
            "focus.z1_stop_cm": 198.0,
            "focus.z1_step_cm": 2.0,
        },
    },
    "aperture-distance": {
        "runner": "aperture_distance",
        "description": "Image magnification versus crystal-to-iris distance",
        "overrides": {},
    },
}
