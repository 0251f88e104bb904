"""
Artifact writers: raw float64 images with header sidecars, PGM previews,
CSV tables and the JSON run manifest.
"""

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np
import pandas as pd

from src.core.errors import ArtifactError
from src.core.grid import IntensityMap
from src.utils.logging_config import logger

RAW_DTYPE = "<f8"


def read_raw_image(path: str) -> np.ndarray:
    """Load a .f64 image using its .hdr sidecar for the shape."""
    raw = Path(path)
    header = dict(
        line.split("=", 1) for line in raw.with_suffix(".hdr").read_text(encoding="utf-8").splitlines() if "=" in line
    )
    n = int(header["n"])
    return np.fromfile(raw, dtype=header.get("dtype", RAW_DTYPE)).reshape(n, n)


class ArtifactWriter:
    """Writes run outputs into one directory and records them for the manifest."""

    def __init__(self, out_dir: str, formats: Iterable[str] = ("raw", "pgm", "csv")):
        """
        Initialize the writer.

        Args:
            out_dir: Output directory (created if missing)
            formats: Enabled formats among 'raw', 'pgm', 'csv'

        Raises:
            ArtifactError: Directory cannot be created
        """
        self.out_dir = Path(out_dir)
        self.formats = set(formats)
        self.artifacts: List[str] = []
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Cannot create output directory {out_dir}: {e}")

    def _record(self, path: Path) -> None:
        self.artifacts.append(path.name)
        logger.info(f"Wrote {path}")

    def write_image(self, name: str, image: IntensityMap) -> None:
        """Raw little-endian float64 + header, and an 8-bit preview."""
        try:
            if "raw" in self.formats:
                raw = self.out_dir / f"{name}.f64"
                np.ascontiguousarray(image.values, dtype=RAW_DTYPE).tofile(raw)
                self._record(raw)

                grid = image.grid
                header = self.out_dir / f"{name}.hdr"
                header.write_text(
                    "\n".join([
                        f"n={grid.n}",
                        f"pitch_m={grid.pitch!r}",
                        f"domain={grid.domain}",
                        f"origin_x={grid.origin[0]!r}",
                        f"origin_y={grid.origin[1]!r}",
                        f"normalization={image.normalization}",
                        f"dtype={RAW_DTYPE}",
                        "byte_order=little",
                    ]) + "\n",
                    encoding="utf-8",
                )
                self._record(header)

            if "pgm" in self.formats:
                self.write_preview(name, image)
        except OSError as e:
            raise ArtifactError(f"Failed to write image {name}: {e}")

    def write_preview(self, name: str, image: IntensityMap) -> None:
        """Binary PGM (P5), peak-1 normalization, gamma 1."""
        values = image.normalized("peak-1").values
        pixels = np.clip(np.round(values * 255.0), 0, 255).astype(np.uint8)
        path = self.out_dir / f"{name}.pgm"
        with open(path, "wb") as f:
            f.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii"))
            f.write(pixels.tobytes())
        self._record(path)

    def write_table(self, name: str, table: pd.DataFrame) -> None:
        if "csv" not in self.formats:
            return
        path = self.out_dir / f"{name}.csv"
        try:
            table.to_csv(path, index=False, float_format="%.10g")
        except OSError as e:
            raise ArtifactError(f"Failed to write table {name}: {e}")
        self._record(path)

    def write_manifest(
        self,
        command: str,
        config: Dict[str, Any],
        derived: Dict[str, Any],
        version: str
    ) -> Path:
        """
        Write manifest.json with the resolved config, derived quantities and
        the artifact list. The manifest is itself a valid --config source.
        """
        manifest = {
            "software": {"name": "spdc-imaging", "version": version},
            "command": command,
            "config": config,
            "derived": _jsonable(derived),
            "artifacts": sorted(self.artifacts),
            "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        path = self.out_dir / "manifest.json"
        try:
            path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        except OSError as e:
            raise ArtifactError(f"Failed to write manifest: {e}")
        logger.info(f"Wrote {path}")
        return path


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value
