"""Forward simulation of identified linear models under held controls."""

from collections.abc import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from thermocline_twin.exceptions import DivergenceError, IntegrationError, ShapeError
from thermocline_twin.models.data import ControlVector, TimeGrid, Trajectory
from thermocline_twin.models.sindyc import LinearModel, RolloutConfig
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

_IMPLICIT_METHODS = {"Radau", "BDF", "LSODA"}


def _control_array(
    controls: Sequence[ControlVector] | np.ndarray, n_steps: int, n_u: int
) -> np.ndarray:
    if isinstance(controls, np.ndarray):
        array = np.asarray(controls, dtype=float)
    else:
        array = np.array([c.as_array() for c in controls], dtype=float).reshape(-1, n_u)
    if array.shape != (n_steps, n_u):
        raise ShapeError(f"Controls have shape {array.shape}, expected {(n_steps, n_u)}")
    return array


def _segments(controls: np.ndarray) -> list[tuple[int, int]]:
    n_steps = controls.shape[0]
    if controls.shape[1] == 0:
        return [(0, n_steps - 1)]
    changes = np.flatnonzero(np.any(np.diff(controls, axis=0) != 0.0, axis=1)) + 1
    bounds = sorted({0, n_steps - 1, *changes.tolist()})
    return list(zip(bounds[:-1], bounds[1:]))


def _rollout_exact(
    model: LinearModel, x0: np.ndarray, controls: np.ndarray, grid: TimeGrid, bound: float
) -> np.ndarray:
    n_x = model.state_dim
    block = np.zeros((2 * n_x, 2 * n_x))
    block[:n_x, :n_x] = model.A
    block[:n_x, n_x:] = np.eye(n_x)
    propagator = expm(block * grid.dt)
    phi = propagator[:n_x, :n_x]
    gamma = propagator[:n_x, n_x:]
    forcing = (controls @ model.B.T + model.d) @ gamma.T
    states = np.empty((grid.n_steps, n_x))
    states[0] = x0
    times = grid.times
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, grid.n_steps):
            states[k] = phi @ states[k - 1] + forcing[k - 1]
            if not np.all(np.abs(states[k]) <= bound):
                raise DivergenceError(
                    f"Rollout diverged at t={times[k]:.6g} s", time=float(times[k])
                )
    return states


def rollout(
    model: LinearModel,
    x0: np.ndarray | Sequence[float],
    controls: Sequence[ControlVector] | np.ndarray,
    grid: TimeGrid,
    rcfg: RolloutConfig | None = None,
) -> np.ndarray:
    """Integrate ``dx/dt = A x + B u + d`` with controls held between grid points.

    Returns the state at every grid point, ``(n_steps, n_x)``.

    Raises:
        DivergenceError: once any state magnitude exceeds ``rcfg.blowup_bound``.
    """
    rcfg = rcfg or RolloutConfig()
    x_start = np.asarray(x0, dtype=float).ravel()
    if x_start.shape != (model.state_dim,):
        raise ShapeError(f"x0 has {x_start.size} entries, model has {model.state_dim} states")
    u = _control_array(controls, grid.n_steps, model.input_dim)
    if rcfg.method == "exact":
        return _rollout_exact(model, x_start, u, grid, rcfg.blowup_bound)

    A, B, d = model.A, model.B, model.d
    bound = rcfg.blowup_bound
    times = grid.times
    states = np.empty((grid.n_steps, model.state_dim))
    states[0] = x_start
    nfev = 0

    def blowup(_t: float, x: np.ndarray) -> float:
        return float(bound - np.max(np.abs(x)))

    blowup.terminal = True  # type: ignore[attr-defined]

    options = {"jac": A} if rcfg.method in _IMPLICIT_METHODS else {}
    for start, stop in _segments(u):
        forcing = B @ u[start] + d

        def rhs(_t: float, x: np.ndarray, forcing: np.ndarray = forcing) -> np.ndarray:
            return A @ x + forcing

        solution = solve_ivp(
            rhs,
            (times[start], times[stop]),
            states[start],
            method=rcfg.method,
            t_eval=times[start : stop + 1],
            rtol=rcfg.rtol,
            atol=rcfg.atol,
            events=blowup,
            **options,
        )
        nfev += solution.nfev
        if solution.status == 1:
            failed_at = float(solution.t_events[0][0])
            raise DivergenceError(f"Rollout diverged at t={failed_at:.6g} s", time=failed_at)
        if not solution.success:
            reached = float(solution.t[-1]) if solution.t.size else float(times[start])
            raise IntegrationError(
                f"Rollout integration stopped at t={reached:.6g} s: {solution.message}",
                time_reached=reached,
            )
        states[start : stop + 1] = solution.y.T

    logger.debug(f"Rollout ({rcfg.method}) used {nfev} RHS evaluations")
    return states


def rollout_on(
    model: LinearModel, traj: Trajectory, rcfg: RolloutConfig | None = None
) -> np.ndarray:
    """Rollout from the trajectory's first state under its controls."""
    return rollout(model, traj.states(model.target)[0], traj.controls, traj.grid, rcfg)
