"""Linear resampling of trajectories onto another uniform grid."""

import numpy as np

from thermocline_twin.exceptions import SpanMismatchError
from thermocline_twin.models.data import TimeGrid, Trajectory


def _interpolate_block(times: np.ndarray, source_times: np.ndarray, block: np.ndarray) -> np.ndarray:
    return np.column_stack(
        [np.interp(times, source_times, block[:, col]) for col in range(block.shape[1])]
    )


def resample_trajectory(traj: Trajectory, target: TimeGrid) -> Trajectory:
    """Linearly interpolate every channel of ``traj`` onto ``target``.

    Raises:
        SpanMismatchError: if the target grid reaches outside the source span.
    """
    source = traj.grid
    tol = 1e-9 * max(source.span, 1.0)
    if target.t0 < source.t0 - tol or target.t_end > source.t_end + tol:
        raise SpanMismatchError(
            f"Target span [{target.t0}, {target.t_end}] exceeds source span "
            f"[{source.t0}, {source.t_end}]",
            trajectory_id=traj.id,
        )

    source_times = source.times
    times = np.clip(target.times, source.t0, source.t_end)
    blocks = {}
    for name in ("controls", "ghx", "tes"):
        block = getattr(traj, name)
        values = _interpolate_block(times, source_times, block)
        # endpoints that coincide with source endpoints are copied exactly
        if abs(target.t0 - source.t0) <= tol:
            values[0] = block[0]
        if abs(target.t_end - source.t_end) <= tol:
            values[-1] = block[-1]
        blocks[name] = values
    return traj.replace(grid=target, **blocks)
