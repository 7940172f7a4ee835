"""Test configuration and shared fixtures for thermocline_twin.

Fixtures build small grids, planted linear systems and short simulated
datasets so that unit tests stay fast and deterministic.
"""

import shutil
import tempfile
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from thermocline_twin.models.active_learning import (
    AlLoopConfig,
    MahalanobisStrategy,
    PredictionErrorStrategy,
)
from thermocline_twin.models.data import Dataset, RngStream, TimeGrid, Trajectory
from thermocline_twin.models.harness import ArmSpec, ExperimentConfig, NoiseSpec
from thermocline_twin.models.neural import TrainConfig
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    BedConfig,
    GhxConfig,
    InitialBedSpec,
    SolverTolerance,
)
from thermocline_twin.services.sindyc import estimate_derivatives
from thermocline_twin.services.thermosim import TrajectoryGenerator

PLANTED_A = np.array([[-0.5, 0.0], [0.2, -0.8]])
PLANTED_B = np.array([[0.3, 0.0, -0.4, 0.0], [0.0, 0.7, 0.0, 0.25]])
PLANTED_D = np.array([0.1, 0.0])


@pytest.fixture
def temp_dir():
    """Temporary directory fixture."""
    temp_dir = Path(tempfile.mkdtemp(prefix="thermotwin_test_"))
    yield temp_dir
    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def stream() -> RngStream:
    """Fixed random stream for tests."""
    return RngStream(seed=1234, stream_label="tests")


@pytest.fixture
def grid() -> TimeGrid:
    """200-step grid with unit spacing."""
    return TimeGrid(t0=0.0, dt=1.0, n_steps=200)


def make_trajectory(
    traj_id: int,
    grid: TimeGrid,
    controls: np.ndarray,
    ghx: np.ndarray,
    tes: np.ndarray | None = None,
) -> Trajectory:
    """Trajectory from raw blocks; TES channels default to a plausible constant."""
    if tes is None:
        tes = np.tile([0.3, 400.0, 420.0, 380.0, 340.0], (grid.n_steps, 1))
    return Trajectory(id=traj_id, grid=grid, controls=controls, ghx=ghx, tes=tes)


@pytest.fixture
def trajectory_factory() -> Callable[..., Trajectory]:
    """Factory building trajectories from raw arrays."""
    return make_trajectory


def planted_dataset(
    A: np.ndarray,
    B: np.ndarray,
    d: np.ndarray,
    n_traj: int = 3,
    grid: TimeGrid | None = None,
    seed: int = 0,
    noise: float = 0.0,
) -> Dataset:
    """Trajectories whose finite-difference derivatives satisfy ``A x + B u + d`` exactly.

    States and the last two controls are random; the first two controls are
    solved for so the regression system is consistent.
    """
    grid = grid or TimeGrid(t0=0.0, dt=1.0, n_steps=200)
    rng = np.random.default_rng(seed)
    trajectories = []
    for traj_id in range(n_traj):
        x = rng.standard_normal((grid.n_steps, 2))
        u = rng.standard_normal((grid.n_steps, 4))
        dx = estimate_derivatives(x, grid.dt)
        residual = dx - x @ A.T - d - u[:, 2:] @ B[:, 2:].T
        u[:, :2] = np.linalg.solve(B[:, :2], residual.T).T
        if noise:
            x = x + rng.normal(0.0, noise, size=x.shape)
        trajectories.append(make_trajectory(traj_id, grid, u, x))
    return Dataset.of(trajectories)


@pytest.fixture
def planted() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """GHX-sized planted system ``(A, B, d)`` with a known zero pattern."""
    return PLANTED_A, PLANTED_B, PLANTED_D


@pytest.fixture
def planted_data(planted) -> Dataset:
    """Consistent noiseless dataset of the planted system."""
    A, B, d = planted
    return planted_dataset(A, B, d)


@pytest.fixture
def small_bed() -> BedConfig:
    """Coarse bed for quick simulations."""
    return BedConfig(n_nodes=10)


@pytest.fixture(scope="session")
def sim_grid() -> TimeGrid:
    """Short simulation grid: 121 steps over 600 s."""
    return TimeGrid.from_span(121, 600.0)


@pytest.fixture(scope="session")
def sim_dataset(sim_grid) -> Dataset:
    """Eight simulated trajectories on the coarse bed."""
    bed = BedConfig(n_nodes=10)
    generator = TrajectoryGenerator(
        bed, GhxConfig(), InitialBedSpec().build(bed), SolverTolerance(rtol=1e-6, atol=1e-6)
    )
    return generator.generate(
        8, ActuatorBounds(), sim_grid, 50.0, RngStream(seed=7, stream_label="fixture/pool")
    )


def tiny_config(**overrides: object) -> ExperimentConfig:
    """Experiment config small enough for end-to-end tests."""
    small_loop = {"max_rounds": 2, "batch_size": 2}
    values: dict[str, object] = {
        "name": "tiny",
        "seed": 11,
        "grid_steps": 121,
        "grid_span": 600.0,
        "bed": BedConfig(n_nodes=10),
        "pool_size": 10,
        "eval_size": 2,
        "ensemble_size": 12,
        "subset_size": 3,
        "fnn": TrainConfig(epochs=2, batch_size=64, hidden_width=8),
        "gru": TrainConfig(epochs=1, batch_size=32, hidden_width=4, lookback=5, window_stride=10),
        "arms": {
            "mvg": ArmSpec(
                strategy=MahalanobisStrategy(), loop=AlLoopConfig(init_size=4, **small_loop)
            ),
            "sindyc": ArmSpec(
                strategy=PredictionErrorStrategy(), loop=AlLoopConfig(init_size=2, **small_loop)
            ),
            "fnn": ArmSpec(
                strategy=PredictionErrorStrategy(), loop=AlLoopConfig(init_size=2, **small_loop)
            ),
            "gru": ArmSpec(
                strategy=PredictionErrorStrategy(), loop=AlLoopConfig(init_size=2, **small_loop)
            ),
        },
        "noise": NoiseSpec(),
        "smoothing_window": 11,
        "band_samples": 100,
        "timing": "off",
    }
    values.update(overrides)
    return ExperimentConfig(**values)  # type: ignore[arg-type]


@pytest.fixture
def tiny_experiment_config() -> ExperimentConfig:
    """End-to-end config on a 121-step grid with a ten-trajectory pool."""
    return tiny_config()
