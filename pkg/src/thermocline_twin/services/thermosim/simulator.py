"""Closed-loop discharge simulation of the storage tank and heat exchanger."""

import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from thermocline_twin.exceptions import IntegrationError, NumericError
from thermocline_twin.models.data import (
    Dataset,
    GhxState,
    Provenance,
    RngStream,
    TimeGrid,
    Trajectory,
)
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    ActuatorSchedule,
    BedConfig,
    BedInputs,
    BedState,
    GhxConfig,
    SolverTolerance,
)
from thermocline_twin.services.thermosim.bed import integrate_bed
from thermocline_twin.services.thermosim.ghx import ghx_outputs, lag_valve
from thermocline_twin.services.thermosim.schedules import generate_schedules
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

SENSOR_HEIGHTS: tuple[float, float, float] = (0.9, 0.5, 0.1)


def sensor_temperatures(t_fluid: np.ndarray, cfg: BedConfig) -> np.ndarray:
    """Fluid temperature at the sensor heights, ``(..., 3)`` for top, mid, bottom."""
    n_nodes = t_fluid.shape[-1]
    depths = (np.arange(n_nodes) + 0.5) * (cfg.height / n_nodes)
    sensor_depths = cfg.height * (1.0 - np.asarray(SENSOR_HEIGHTS))
    flat = np.atleast_2d(t_fluid)
    values = np.stack([np.interp(sensor_depths, depths, row) for row in flat])
    return values.reshape(*t_fluid.shape[:-1], len(SENSOR_HEIGHTS))


def _segment_bounds(controls: np.ndarray) -> list[int]:
    changes = np.flatnonzero(np.any(np.diff(controls[:, 1:3], axis=0) != 0.0, axis=1)) + 1
    last = controls.shape[0] - 1
    return sorted({0, last, *changes.tolist()})


def simulate(
    schedule: ActuatorSchedule,
    bed0: BedState,
    cfg: BedConfig,
    gcfg: GhxConfig,
    grid: TimeGrid,
    tol: SolverTolerance | None = None,
    ghx0: GhxState | None = None,
    trajectory_id: int | None = None,
    provenance: Provenance = Provenance.SIMULATED,
) -> Trajectory:
    """Roll the tank and heat exchanger forward under ``schedule``.

    The pump draws ``m_pump_out`` up through the bed (inlet at the bottom at
    ``t_pump_in``); the top outlet, topped up by the heater to ``t_heater_out``,
    feeds the heat exchanger. Controls are held between grid points. Without
    ``ghx0`` the valve starts settled at its first setpoint.
    """
    tol = tol or SolverTolerance()
    traj_id = schedule.id if trajectory_id is None else trajectory_id
    times = grid.times
    controls = schedule.evaluate(times)
    n_steps = grid.n_steps

    bed = np.empty((n_steps, 2 * bed0.n_nodes))
    state = bed0
    bounds = _segment_bounds(controls)
    for start, stop in zip(bounds[:-1], bounds[1:]):
        inputs = BedInputs(inlet_temp=controls[start, 2], mass_flow=-controls[start, 1])
        try:
            samples = integrate_bed(state, inputs, times[start : stop + 1] - times[start], cfg, tol)
        except IntegrationError as e:
            failed_at = float(times[start] + e.details.get("time_reached", 0.0))
            raise IntegrationError(
                f"Trajectory {traj_id}: {e.message}",
                trajectory_id=traj_id,
                time=failed_at,
            ) from e
        bed[start : stop + 1] = samples
        state = BedState.from_vector(samples[-1])
        try:
            state.check_guard(cfg, context=f"t={times[stop]:.1f} s")
        except NumericError as e:
            raise NumericError(
                f"Trajectory {traj_id}: {e.message}", trajectory_id=traj_id, time=float(times[stop])
            ) from e

    t_fluid = bed[:, : bed0.n_nodes]
    t_tes_out = t_fluid[:, 0]
    sensors = sensor_temperatures(t_fluid, cfg)
    tes = np.column_stack([controls[:, 1], t_tes_out, sensors])

    supply = np.maximum(t_tes_out, controls[:, 3])
    ghx = np.empty((n_steps, 2))
    fraction = controls[0, 0] if ghx0 is None else ghx0.valve_fraction
    if ghx0 is None:
        ghx[0] = ghx_outputs(supply[0], fraction, controls[0, 1], gcfg)
    else:
        ghx[0] = ghx0.as_array()
    for k in range(1, n_steps):
        fraction = lag_valve(fraction, controls[k - 1, 0], grid.dt, gcfg)
        ghx[k] = ghx_outputs(supply[k], fraction, controls[k, 1], gcfg)

    return Trajectory(
        id=traj_id, grid=grid, controls=controls, ghx=ghx, tes=tes, provenance=provenance
    )


class TrajectoryGenerator:
    """Service that turns schedules into simulated trajectories."""

    def __init__(
        self,
        bed_config: BedConfig,
        ghx_config: GhxConfig,
        bed0: BedState,
        tol: SolverTolerance | None = None,
        workers: int = 1,
    ):
        """Initialize the generator with fixed physics and initial tank state."""
        self.bed_config = bed_config
        self.ghx_config = ghx_config
        self.bed0 = bed0
        self.tol = tol or SolverTolerance()
        self.workers = workers
        self.logger = logging_service.get_logger(__name__)

    def simulate_many(self, schedules: list[ActuatorSchedule], grid: TimeGrid) -> list[Trajectory]:
        """Simulate every schedule; results are ordered by schedule id."""
        run = partial(
            simulate,
            bed0=self.bed0,
            cfg=self.bed_config,
            gcfg=self.ghx_config,
            grid=grid,
            tol=self.tol,
        )
        start = time.perf_counter()
        if self.workers > 1 and len(schedules) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                trajectories = list(pool.map(run, schedules))
        else:
            trajectories = []
            for schedule in schedules:
                trajectories.append(run(schedule))
                self.logger.debug(f"Simulated trajectory {schedule.id}")
        trajectories.sort(key=lambda traj: traj.id)
        self.logger.info(
            f"Simulated {len(trajectories)} trajectories in {time.perf_counter() - start:.2f} seconds"
        )
        return trajectories

    def generate(
        self,
        n: int,
        bounds: ActuatorBounds,
        grid: TimeGrid,
        stagger_gap: float,
        stream: RngStream,
    ) -> Dataset:
        """Sobol schedules plus simulation, as a dataset with ids ``0..n-1``."""
        schedules = generate_schedules(n, bounds, grid, stagger_gap, stream)
        return Dataset(trajectories=tuple(self.simulate_many(schedules, grid)), grid=grid)
