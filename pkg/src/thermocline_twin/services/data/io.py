"""Trajectory CSV files and dataset manifests."""

import json
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from thermocline_twin.exceptions import ConfigError, ManifestError, ShapeError
from thermocline_twin.models.data import (
    CONTROL_CHANNELS,
    GHX_CHANNELS,
    TES_CHANNELS,
    Dataset,
    Provenance,
    TimeGrid,
    Trajectory,
    celsius_to_kelvin,
    kelvin_to_celsius,
)
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

CSV_COLUMNS: tuple[str, ...] = ("t", *CONTROL_CHANNELS, *GHX_CHANNELS, *TES_CHANNELS)
TEMPERATURE_COLUMNS: tuple[str, ...] = (
    "t_pump_in",
    "t_heater_out",
    "t_tes_out",
    "t_top",
    "t_mid",
    "t_bot",
)
FLOAT_FORMAT = "%.17g"

TemperatureUnit = Literal["K", "C"]


class ManifestEntry(BaseModel):
    """One trajectory file referenced by a manifest."""

    id: int = Field(ge=0)
    path: str
    provenance: Provenance = Provenance.SIMULATED


class DatasetManifest(BaseModel):
    """Dataset manifest: grid, trajectory files and the seed that produced them."""

    grid: TimeGrid
    entries: list[ManifestEntry]
    generator_seed: int | None = None
    held_out_ids: list[int] = Field(default_factory=list)
    temperature_unit: TemperatureUnit = "K"


def write_trajectory_csv(
    traj: Trajectory, path: Path, temperature_unit: TemperatureUnit = "K"
) -> Path:
    """Write one trajectory as CSV with the fixed column header."""
    frame = pd.DataFrame(
        np.column_stack([traj.grid.times, traj.controls, traj.ghx, traj.tes]),
        columns=list(CSV_COLUMNS),
    )
    if temperature_unit == "C":
        columns = list(TEMPERATURE_COLUMNS)
        frame[columns] = kelvin_to_celsius(frame[columns].to_numpy())
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
    return path


def read_trajectory_csv(
    path: Path,
    trajectory_id: int,
    provenance: Provenance = Provenance.SIMULATED,
    temperature_unit: TemperatureUnit = "K",
) -> Trajectory:
    """Read a trajectory CSV written by :func:`write_trajectory_csv`."""
    if not path.exists():
        raise ManifestError(f"Trajectory file not found: {path}", path=str(path))
    frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    missing = [col for col in CSV_COLUMNS if col not in frame.columns]
    if missing:
        raise ShapeError(f"{path} is missing columns {missing}", path=str(path))
    if temperature_unit == "C":
        columns = list(TEMPERATURE_COLUMNS)
        frame[columns] = celsius_to_kelvin(frame[columns].to_numpy())
    times = frame["t"].to_numpy(dtype=float)
    if times.size < 2:
        raise ShapeError(f"{path} has fewer than two rows", path=str(path))
    grid = TimeGrid.from_span(times.size, float(times[-1] - times[0]), t0=float(times[0]))
    return Trajectory(
        id=trajectory_id,
        grid=grid,
        controls=frame[list(CONTROL_CHANNELS)].to_numpy(dtype=float),
        ghx=frame[list(GHX_CHANNELS)].to_numpy(dtype=float),
        tes=frame[list(TES_CHANNELS)].to_numpy(dtype=float),
        provenance=provenance,
    )


def save_dataset(
    dataset: Dataset,
    out_dir: Path,
    generator_seed: int | None = None,
    held_out_ids: list[int] | None = None,
    temperature_unit: TemperatureUnit = "K",
) -> Path:
    """Write every trajectory plus ``manifest.json`` into ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for traj in dataset.trajectories:
        name = f"trajectory_{traj.id:05d}.csv"
        write_trajectory_csv(traj, out_dir / name, temperature_unit)
        entries.append(ManifestEntry(id=traj.id, path=name, provenance=traj.provenance))
    manifest = DatasetManifest(
        grid=dataset.grid,
        entries=entries,
        generator_seed=generator_seed,
        held_out_ids=sorted(held_out_ids or []),
        temperature_unit=temperature_unit,
    )
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(entries)} trajectories to {out_dir}")
    return manifest_path


def read_manifest(manifest_path: Path) -> DatasetManifest:
    """Parse a manifest file."""
    if not manifest_path.exists():
        raise ManifestError(f"Manifest not found: {manifest_path}", path=str(manifest_path))
    try:
        return DatasetManifest.model_validate(json.loads(manifest_path.read_text(encoding="utf-8")))
    except (ValidationError, json.JSONDecodeError) as e:
        raise ConfigError(f"Malformed manifest {manifest_path}: {e}", path=str(manifest_path)) from e


def load_dataset(manifest_path: Path) -> tuple[Dataset, DatasetManifest]:
    """Load every trajectory listed in a manifest, resolved relative to it."""
    manifest = read_manifest(manifest_path)
    base = manifest_path.parent
    trajectories = [
        read_trajectory_csv(base / entry.path, entry.id, entry.provenance, manifest.temperature_unit)
        for entry in manifest.entries
    ]
    # grids are rebuilt from the CSV times, so pin them to the manifest grid
    trajectories = [traj.replace(grid=manifest.grid) for traj in trajectories]
    return Dataset(trajectories=tuple(trajectories), grid=manifest.grid), manifest
