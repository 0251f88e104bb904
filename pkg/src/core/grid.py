"""
Sampled grids, complex fields and intensity maps shared by all modules.
"""

from dataclasses import dataclass, field, replace
from typing import Literal, Tuple

import numpy as np

from src.core.errors import DomainError

Domain = Literal["position", "momentum"]
Normalization = Literal["peak-1", "unit-sum", "raw"]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Grid2D:
    """
    Square sampling grid.

    Args:
        n: Samples per axis (power of two, at least 16)
        pitch: Sample spacing; meters in position space, rad/m in momentum space
        domain: 'position' or 'momentum'
        origin: Coordinate of the central sample (index n//2 on both axes)
    """

    n: int
    pitch: float
    domain: Domain = "position"
    origin: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise DomainError(f"Grid size must be a power of two >= 16, got {self.n}")
        if not self.pitch > 0:
            raise DomainError(f"Grid pitch must be positive, got {self.pitch}")
        if self.domain not in ("position", "momentum"):
            raise DomainError(f"Unknown grid domain: {self.domain}")

    @property
    def window(self) -> float:
        """Full width of the sampled window."""
        return self.n * self.pitch

    def axis(self) -> np.ndarray:
        """Centred sample offsets along one axis (origin not included)."""
        return (np.arange(self.n) - self.n // 2) * self.pitch

    def mesh(self, absolute: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """
        Coordinate arrays (X, Y) with Y along rows.

        Args:
            absolute: Add the grid origin to the offsets
        """
        ax = self.axis()
        x, y = np.meshgrid(ax, ax, indexing="xy")
        if absolute:
            x = x + self.origin[0]
            y = y + self.origin[1]
        return x, y

    def radius_squared(self) -> np.ndarray:
        x, y = self.mesh()
        return x * x + y * y

    def conjugate(self, origin: Tuple[float, float] = (0.0, 0.0)) -> "Grid2D":
        """Grid paired with this one by the centred Fourier transform."""
        other = "momentum" if self.domain == "position" else "position"
        return Grid2D(self.n, 2.0 * np.pi / (self.n * self.pitch), other, origin)

    def with_origin(self, origin: Tuple[float, float]) -> "Grid2D":
        return replace(self, origin=(float(origin[0]), float(origin[1])))

    def index_of(self, point: Tuple[float, float]) -> Tuple[float, float]:
        """Fractional (row, col) index of an absolute coordinate."""
        col = (point[0] - self.origin[0]) / self.pitch + self.n // 2
        row = (point[1] - self.origin[1]) / self.pitch + self.n // 2
        return row, col

    def contains(self, point: Tuple[float, float]) -> bool:
        row, col = self.index_of(point)
        return 0.0 <= row <= self.n - 1 and 0.0 <= col <= self.n - 1


@dataclass(frozen=True)
class ComplexField:
    """Sampled complex amplitude on a grid; values are read-only."""

    grid: Grid2D
    values: np.ndarray
    photon_wavelength_m: float

    def __post_init__(self):
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n, self.grid.n):
            raise DomainError(
                f"Field shape {values.shape} does not match grid {self.grid.n}x{self.grid.n}"
            )
        if not self.photon_wavelength_m > 0:
            raise DomainError("Photon wavelength must be positive")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def wavenumber(self) -> float:
        """Vacuum wavenumber 2π/λ."""
        return 2.0 * np.pi / self.photon_wavelength_m

    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.pitch ** 2)

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def with_values(self, values: np.ndarray, grid: Grid2D = None) -> "ComplexField":
        return ComplexField(grid or self.grid, values, self.photon_wavelength_m)


@dataclass(frozen=True)
class IntensityMap:
    """Nonnegative real image with a normalization record."""

    grid: Grid2D
    values: np.ndarray
    normalization: Normalization = "raw"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n, self.grid.n):
            raise DomainError(
                f"Image shape {values.shape} does not match grid {self.grid.n}x{self.grid.n}"
            )
        if np.any(values < 0):
            # Round-off from |.|^2 sums never goes negative, resampling can
            values = np.clip(values, 0.0, None)
        object.__setattr__(self, "values", _frozen(values))

    def total(self) -> float:
        return float(np.sum(self.values) * self.grid.pitch ** 2)

    def normalized(self, kind: Normalization) -> "IntensityMap":
        """Return a copy rescaled to the requested normalization."""
        values = np.array(self.values)
        if kind == "peak-1":
            peak = values.max()
            if peak > 0:
                values = values / peak
        elif kind == "unit-sum":
            s = values.sum()
            if s > 0:
                values = values / s
        return IntensityMap(self.grid, values, kind, dict(self.metadata))
