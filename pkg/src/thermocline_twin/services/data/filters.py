"""Savitzky-Golay smoothing."""

from collections.abc import Sequence

import numpy as np
from scipy import signal

from thermocline_twin.exceptions import ParameterError, ShapeError
from thermocline_twin.models.data import Trajectory


def savgol_filter(
    series: Sequence[float] | np.ndarray, window: int, poly_order: int
) -> np.ndarray:
    """Savitzky-Golay filter with polynomial extrapolation of the edge fits.

    Args:
        series: 1-D samples.
        window: odd window length.
        poly_order: polynomial order, strictly below ``window``.
    """
    if window < 1 or window % 2 == 0:
        raise ParameterError(f"Window must be a positive odd count, got {window}", window=window)
    if poly_order < 0 or window <= poly_order:
        raise ParameterError(
            f"Window ({window}) must exceed poly_order ({poly_order})",
            window=window,
            poly_order=poly_order,
        )
    values = np.asarray(series, dtype=float)
    if values.ndim != 1:
        raise ShapeError(f"Expected a 1-D series, got shape {values.shape}")
    if values.size < window:
        raise ShapeError(
            f"Series length {values.size} is shorter than the window {window}",
            length=int(values.size),
            window=window,
        )
    if window == 1:
        return values.copy()
    return np.asarray(signal.savgol_filter(values, window, poly_order, mode="interp"))


def smooth_trajectory(
    traj: Trajectory,
    window: int,
    poly_order: int,
    groups: tuple[str, ...] = ("ghx", "tes"),
) -> Trajectory:
    """Trajectory with every channel of the named groups filtered."""
    changes = {}
    for name in groups:
        block = getattr(traj, name)
        changes[name] = np.column_stack(
            [savgol_filter(block[:, col], window, poly_order) for col in range(block.shape[1])]
        )
    return traj.replace(**changes)
