"""
Shared fixtures: crystals, grids, pumps and the aperture-and-lens imaging geometry.
"""

import numpy as np
import pytest

from src.analysis.focus import imaging_train
from src.cli.run_config import parse_pump_terms
from src.core.grid import Grid2D
from src.optics.crystal import CrystalParams, ring_position
from src.optics.modes import PumpSpec
from src.optics.propagation import ApertureSpec

Z0_M = 0.05
FOCAL_M = 0.10
IMAGE_PLANE_M = FOCAL_M * (1.0 + FOCAL_M / Z0_M)


@pytest.fixture
def crystal():
    return CrystalParams()


@pytest.fixture
def thin_crystal():
    """0.2 mm crystal: the sinc envelope is flat over the sampled idler block."""
    return CrystalParams(length_m=0.2e-3)


@pytest.fixture
def crystal_grid():
    return Grid2D(128, 16e-6, "position")


def make_pump(terms: str, waist_um: float) -> PumpSpec:
    return PumpSpec(terms=parse_pump_terms(terms), waist_m=waist_um * 1e-6)


@pytest.fixture
def hg_pump():
    return make_pump("0:1:1, 0:-1:-1", 400.0)


@pytest.fixture
def ring_train():
    """Factory for the far-field / aperture-on-ring / lens train."""
    def build(crystal, diameter_um, angle_deg=90.0, z1_m=FOCAL_M):
        centre = ring_position(crystal, Z0_M, np.radians(angle_deg))
        return imaging_train(Z0_M, FOCAL_M, z1_m, ApertureSpec(diameter_m=diameter_um * 1e-6, center=centre))
    return build
