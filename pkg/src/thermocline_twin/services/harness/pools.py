"""Candidate pools, held-out sets and pool lookups."""

import numpy as np

from thermocline_twin.exceptions import ParameterError, ShapeError
from thermocline_twin.models.data import Dataset, RngStream, TimeGrid, Trajectory
from thermocline_twin.models.harness import ExperimentConfig
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    ActuatorRange,
    ActuatorSchedule,
    BedConfig,
    GhxConfig,
    InitialBedSpec,
    SolverTolerance,
)
from thermocline_twin.services.thermosim import (
    TrajectoryGenerator,
    discharge_schedule,
    generate_schedules,
)
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

REGIME_A = ActuatorBounds(
    m_pump_out=ActuatorRange(low=0.2, high=0.3),
    t_pump_in=ActuatorRange(low=320.0, high=335.0),
    t_heater_out=ActuatorRange(low=430.0, high=445.0),
)
REGIME_B = ActuatorBounds(
    m_pump_out=ActuatorRange(low=0.4, high=0.5),
    t_pump_in=ActuatorRange(low=345.0, high=360.0),
    t_heater_out=ActuatorRange(low=465.0, high=480.0),
)


def generator_for(config: ExperimentConfig) -> TrajectoryGenerator:
    return TrajectoryGenerator(
        config.bed,
        config.ghx,
        config.initial_bed.build(config.bed),
        config.tolerance,
        config.workers,
    )


def build_pool(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Simulated candidate pool and held-out evaluation set.

    Both come from one Sobol draw; the last ``eval_size`` ids are held out.
    """
    total = config.pool_size + config.eval_size
    data = generator_for(config).generate(
        total,
        config.bounds,
        config.grid,
        config.stagger_gap,
        RngStream(seed=config.seed, stream_label="pool"),
    )
    pool_ids = list(data.ids[: config.pool_size])
    eval_ids = list(data.ids[config.pool_size :])
    return data.subset(pool_ids), data.subset(eval_ids)


def experiment_schedule(config: ExperimentConfig) -> ActuatorSchedule:
    """Schedule of the pseudo-experiment; its id follows every pool and eval id."""
    schedule_id = config.pool_size + config.eval_size
    if config.experiment_schedule == "discharge":
        return discharge_schedule(config.grid, schedule_id=schedule_id)
    schedule = generate_schedules(
        1,
        config.bounds,
        config.grid,
        config.stagger_gap,
        RngStream(seed=config.seed, stream_label="experiment/schedule"),
    )[0]
    return schedule.model_copy(update={"id": schedule_id})


def _regime(
    n: int,
    first_id: int,
    bounds: ActuatorBounds,
    generator: TrajectoryGenerator,
    grid: TimeGrid,
    stagger_gap: float,
    stream: RngStream,
) -> list[Trajectory]:
    if n == 0:
        return []
    schedules = [
        s.model_copy(update={"id": first_id + s.id})
        for s in generate_schedules(n, bounds, grid, stagger_gap, stream)
    ]
    return generator.simulate_many(schedules, grid)


def build_two_regime_pool(
    grid: TimeGrid,
    n_common: int,
    n_rare: int,
    n_eval: int,
    stream: RngStream,
    bed: BedConfig | None = None,
    ghx: GhxConfig | None = None,
    common: ActuatorBounds = REGIME_A,
    rare: ActuatorBounds = REGIME_B,
    stagger_gap: float = 50.0,
    initial_bed: InitialBedSpec | None = None,
    tol: SolverTolerance | None = None,
) -> tuple[Dataset, Dataset]:
    """Pool dominated by one operating regime with a few trajectories of another.

    The evaluation set is drawn from the rare regime, so the informative pool
    members are the hidden rare ones. Ids: common ``0..n_common-1``, rare next,
    evaluation last.
    """
    if n_common < 1 or n_rare < 1 or n_eval < 1:
        raise ParameterError("Every regime group needs at least one trajectory")
    bed = bed or BedConfig()
    generator = TrajectoryGenerator(
        bed, ghx or GhxConfig(), (initial_bed or InitialBedSpec()).build(bed), tol
    )
    common_trajs = _regime(n_common, 0, common, generator, grid, stagger_gap, stream.child("common"))
    rare_all = _regime(
        n_rare + n_eval, n_common, rare, generator, grid, stagger_gap, stream.child("rare")
    )
    pool = Dataset.of(common_trajs + rare_all[:n_rare])
    eval_set = Dataset.of(rare_all[n_rare:])
    logger.info(
        f"Two-regime pool: {n_common} common, {n_rare} rare hidden, {n_eval} rare held out"
    )
    return pool, eval_set


def control_distances(dataset: Dataset, reference: Trajectory) -> np.ndarray:
    """Per-trajectory RMSE over control channels scaled by their dataset-wide std."""
    if reference.n_steps != dataset.grid.n_steps:
        raise ShapeError(
            f"Reference has {reference.n_steps} steps, dataset {dataset.grid.n_steps}"
        )
    controls = np.stack([traj.controls for traj in dataset.trajectories])
    scales = controls.reshape(-1, controls.shape[-1]).std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    diffs = (controls - reference.controls) / scales
    return np.asarray(np.sqrt(np.mean(diffs**2, axis=(1, 2))))


def closest_match(dataset: Dataset, reference: Trajectory) -> Trajectory:
    """Pool trajectory whose controls are closest to ``reference``'s; ties go to the smaller id."""
    distances = control_distances(dataset, reference)
    ids = np.asarray(dataset.ids)
    best = int(np.lexsort((ids, distances))[0])
    return dataset.trajectories[best]
