"""Degree-one candidate library and derivative estimation."""

import numpy as np

from thermocline_twin.exceptions import ShapeError


def build_library(states: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Design matrix with rows ``[1, x_1..x_nx, u_1..u_nu]``.

    A 1-D ``states``/``controls`` pair is treated as a single sample.
    """
    x = np.asarray(states, dtype=float)
    u = np.asarray(controls, dtype=float)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if u.ndim == 1:
        u = u[np.newaxis, :]
    if x.shape[0] != u.shape[0]:
        raise ShapeError(
            f"States have {x.shape[0]} samples but controls have {u.shape[0]}",
            states=x.shape[0],
            controls=u.shape[0],
        )
    return np.hstack([np.ones((x.shape[0], 1)), x, u])


def library_names(state_names: tuple[str, ...], control_names: tuple[str, ...]) -> list[str]:
    """Column names of :func:`build_library` for the given channels."""
    return ["1", *state_names, *control_names]


def estimate_derivatives(series: np.ndarray, dt: float) -> np.ndarray:
    """Second-order finite differences: central inside, one-sided at both ends.

    Works column-wise on 2-D input.
    """
    values = np.asarray(series, dtype=float)
    if values.shape[0] < 3:
        raise ShapeError(f"Need at least 3 samples to differentiate, got {values.shape[0]}")
    return np.asarray(np.gradient(values, dt, axis=0, edge_order=2))
