"""
Error types raised by the simulator. Each carries a stable code string.
"""


class SimulationError(Exception):
    """Base class for all simulator errors."""

    code = "runtime"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return f"[{self.code}] {self.message}"


class GridResolutionError(SimulationError):
    code = "grid-resolution"


class DomainError(SimulationError):
    code = "domain"


class DegenerateSpecError(SimulationError):
    code = "degenerate-spec"


class DispersionRangeError(SimulationError):
    code = "dispersion-range"


class EvanescentError(SimulationError):
    code = "evanescent"


class ApertureResolutionError(SimulationError):
    code = "aperture-resolution"


class SamplingMissError(SimulationError):
    code = "sampling-miss"


class GratingResolutionError(SimulationError):
    code = "grating-resolution"


class OrderOverlapError(SimulationError):
    code = "order-overlap"


class DegenerateImageError(SimulationError):
    code = "degenerate-image"


class ConfigError(SimulationError):
    """Unknown preset, malformed config file or invalid override."""

    code = "config"


class ArtifactError(SimulationError):
    """Output directory not writable or a write failed."""

    code = "io"
