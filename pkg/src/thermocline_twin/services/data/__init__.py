"""Data services: resampling, filtering, metrics and file I/O."""

from thermocline_twin.services.data.filters import savgol_filter, smooth_trajectory
from thermocline_twin.services.data.io import (
    DatasetManifest,
    ManifestEntry,
    load_dataset,
    read_trajectory_csv,
    save_dataset,
    write_trajectory_csv,
)
from thermocline_twin.services.data.metrics import channel_rmse, rmse
from thermocline_twin.services.data.resample import resample_trajectory

__all__ = [
    "DatasetManifest",
    "ManifestEntry",
    "channel_rmse",
    "load_dataset",
    "read_trajectory_csv",
    "resample_trajectory",
    "rmse",
    "save_dataset",
    "savgol_filter",
    "smooth_trajectory",
    "write_trajectory_csv",
]
