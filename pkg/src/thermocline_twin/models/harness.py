"""Experiment configuration, pseudo-experiments, reports and run manifests."""

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from thermocline_twin.exceptions import ConfigError, DataError, ManifestError, ParameterError
from thermocline_twin.models.active_learning import (
    BRANCHES,
    AlLoopConfig,
    Branch,
    MahalanobisStrategy,
    PredictionErrorStrategy,
    QueryStrategy,
)
from thermocline_twin.models.base import FrozenModel
from thermocline_twin.models.data import TimeGrid, Trajectory
from thermocline_twin.models.mvg import PredictiveBand
from thermocline_twin.models.neural import TrainConfig
from thermocline_twin.models.sindyc import RolloutConfig, StlsqConfig
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    BedConfig,
    GhxConfig,
    InitialBedSpec,
    SolverTolerance,
)


class PerturbationSpec(BaseModel):
    """Multiplicative changes to the physics used for the pseudo-experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    hc_scale: float = Field(default=1.15, gt=0)
    porosity_scale: float = Field(default=0.95, gt=0)
    effectiveness_scale: float = Field(default=0.90, gt=0)

    @classmethod
    def none(cls) -> "PerturbationSpec":
        return cls(hc_scale=1.0, porosity_scale=1.0, effectiveness_scale=1.0)

    def apply(self, bed: BedConfig, ghx: GhxConfig) -> tuple[BedConfig, GhxConfig]:
        """Perturbed copies of ``bed`` and ``ghx``.

        Raises:
            ParameterError: if a perturbed value leaves its valid range.
        """
        try:
            new_bed = BedConfig.model_validate(
                {
                    **bed.model_dump(),
                    "hc": bed.hc * self.hc_scale,
                    "porosity": bed.porosity * self.porosity_scale,
                }
            )
            new_ghx = GhxConfig.model_validate(
                {**ghx.model_dump(), "effectiveness": ghx.effectiveness * self.effectiveness_scale}
            )
        except ValidationError as e:
            raise ParameterError(f"Perturbation leaves the valid parameter range: {e}") from e
        return new_bed, new_ghx


def _default_sigma() -> dict[str, float]:
    return {
        "m_ghx": 0.005,
        "q_ghx": 400.0,
        "m_tes_in": 0.002,
        "t_tes_out": 0.2,
        "t_top": 0.2,
        "t_mid": 0.2,
        "t_bot": 0.2,
    }


class NoiseSpec(BaseModel):
    """Per-channel i.i.d. Gaussian measurement noise (standard deviations)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma: dict[str, float] = Field(default_factory=_default_sigma)

    @model_validator(mode="after")
    def _check(self) -> "NoiseSpec":
        negative = [name for name, value in self.sigma.items() if value < 0]
        if negative:
            raise ParameterError(f"Noise levels must be non-negative: {negative}")
        return self

    @classmethod
    def none(cls) -> "NoiseSpec":
        return cls(sigma={})


class PseudoExperiment(FrozenModel):
    """Noisy perturbed-physics run standing in for a measured discharge."""

    raw: Trajectory
    denoised: Trajectory
    perturbation: PerturbationSpec
    noise: NoiseSpec
    smoothing_window: int
    smoothing_order: int

    @model_validator(mode="after")
    def _check_lineage(self) -> "PseudoExperiment":
        if self.raw.id != self.denoised.id or not self.raw.grid.is_compatible(self.denoised.grid):
            raise DataError("Raw and denoised pseudo-experiment variants must share id and grid")
        return self


class PseudoExperimentRecord(BaseModel):
    """``experiment.json``: the two variant CSVs and how they were made."""

    id: int = Field(ge=0)
    raw: str
    denoised: str
    perturbation: PerturbationSpec
    noise: NoiseSpec
    smoothing_window: int
    smoothing_order: int


class ArmSpec(BaseModel):
    """Query strategy and round structure of a family's AL arm."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    strategy: QueryStrategy
    loop: AlLoopConfig


def _default_arms() -> dict[Branch, ArmSpec]:
    arms: dict[Branch, ArmSpec] = {}
    for branch in BRANCHES:
        strategy: QueryStrategy = (
            MahalanobisStrategy() if branch == "mvg" else PredictionErrorStrategy()
        )
        arms[branch] = ArmSpec(strategy=strategy, loop=AlLoopConfig.for_branch(branch, max_rounds=8))
    return arms


class ExperimentConfig(BaseModel):
    """Everything a full comparison run depends on, seed included."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "desk"
    seed: int = Field(default=20240601, ge=0, lt=2**64)
    grid_steps: int = Field(default=1050, ge=2)
    grid_span: float = Field(default=5460.0, gt=0)
    bed: BedConfig = BedConfig()
    ghx: GhxConfig = GhxConfig()
    bounds: ActuatorBounds = ActuatorBounds()
    stagger_gap: float = Field(default=50.0, ge=0)
    initial_bed: InitialBedSpec = InitialBedSpec()
    tolerance: SolverTolerance = SolverTolerance(rtol=1e-6, atol=1e-6)
    pool_size: int = Field(default=80, ge=2)
    eval_size: int = Field(default=5, ge=1)
    families: tuple[Branch, ...] = BRANCHES
    ensemble_size: int = Field(default=120, ge=2)
    subset_size: int = Field(default=4, ge=1)
    stlsq: StlsqConfig = StlsqConfig.ghx()
    rollout: RolloutConfig = RolloutConfig(method="exact")
    fnn: TrainConfig = TrainConfig.fnn_desk()
    gru: TrainConfig = TrainConfig.gru_desk()
    arms: dict[Branch, ArmSpec] = Field(default_factory=_default_arms)
    perturbation: PerturbationSpec = PerturbationSpec()
    noise: NoiseSpec = NoiseSpec()
    smoothing_window: int = Field(default=21, ge=1)
    smoothing_order: int = Field(default=3, ge=0)
    experiment_schedule: Literal["sobol", "discharge"] = "sobol"
    band_samples: int = Field(default=1000, ge=100)
    include_experiment_fnn: bool = True
    timing: Literal["wall", "off"] = "wall"
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_families(self) -> "ExperimentConfig":
        missing = [f for f in self.families if f not in self.arms]
        if missing:
            raise ConfigError(f"No AL arm configured for families {missing}")
        if self.subset_size > self.pool_size:
            raise ConfigError("subset_size exceeds the pool size")
        return self

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_span(self.grid_steps, self.grid_span)

    @classmethod
    def desk(cls, **overrides: Any) -> "ExperimentConfig":
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides: Any) -> "ExperimentConfig":
        """Full-scale sizes: 374 trajectories on a 5251-step grid, 500 models, width 128."""
        values: dict[str, Any] = {
            "name": "full",
            "grid_steps": 5251,
            "pool_size": 371,
            "eval_size": 3,
            "ensemble_size": 500,
            "fnn": TrainConfig.fnn_full(),
            "gru": TrainConfig.gru_full(),
        }
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_file(cls, path: Path) -> "ExperimentConfig":
        """Parse a JSON config; a ``preset`` key picks the base (``desk`` or ``full``)."""
        if not path.exists():
            raise ManifestError(f"Config file not found: {path}", path=str(path))
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed config {path}: {e}", path=str(path)) from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must hold a JSON object", path=str(path))
        preset = data.pop("preset", "desk")
        if preset not in ("desk", "full"):
            raise ConfigError(f"Unknown preset {preset!r}", path=str(path))
        try:
            return cls.full(**data) if preset == "full" else cls.desk(**data)
        except ValidationError as e:
            raise ConfigError(f"Invalid config {path}: {e}", path=str(path)) from e


class ScoreRow(BaseModel):
    """RMSE of one model on one dataset."""

    model_config = ConfigDict(frozen=True)

    family: str
    run_id: str
    dataset: str
    rmse_m: float
    rmse_q: float


class CoverageRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    run_id: str
    dataset: str
    coverage_m: float
    coverage_q: float
    n_samples: int
    n_discarded: int


class CurveRow(BaseModel):
    """One history row of one arm, as written to the comparison CSVs."""

    model_config = ConfigDict(frozen=True)

    family: str
    arm: str
    round: int
    n_selected: int
    rmse_m: float
    rmse_q: float
    rmse_exp_m: float
    rmse_exp_q: float
    wall_s: float
    cum_wall_s: float


class RuntimeRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    al_total_s: float
    random_total_s: float
    ratio: float
    al_final_n: int
    random_final_n: int


class ClosestMatchRow(BaseModel):
    """Pool trajectory with the nearest controls to the experiment, and its error there."""

    model_config = ConfigDict(frozen=True)

    run_id: str
    trajectory_id: int
    control_distance: float
    rmse_m: float
    rmse_q: float


class BandRecord(FrozenModel):
    run_id: str
    dataset: str
    band: PredictiveBand

    @property
    def file_stem(self) -> str:
        return "band_" + self.dataset.replace(":", "_")


class Report(BaseModel):
    """Evaluation tables of one run plus the configuration and seeds behind them."""

    model_config = ConfigDict(frozen=True)

    run_id: str
    rmse: tuple[ScoreRow, ...] = ()
    coverage: tuple[CoverageRow, ...] = ()
    curves: tuple[CurveRow, ...] = ()
    runtime: tuple[RuntimeRow, ...] = ()
    closest: tuple[ClosestMatchRow, ...] = ()
    bands: tuple[BandRecord, ...] = ()
    config: dict[str, Any] = Field(default_factory=dict)
    seeds: dict[str, int] = Field(default_factory=dict)


class RunManifest(BaseModel):
    """Links a run's config, seeds and artifact files (relative paths and SHA-256)."""

    model_config = ConfigDict(frozen=True)

    format_version: int = 1
    run_id: str
    config: dict[str, Any]
    seeds: dict[str, int]
    artifacts: dict[str, str]
    hashes: dict[str, str] = Field(default_factory=dict)

    def path_of(self, name: str, root: Path) -> Path:
        if name not in self.artifacts:
            raise ManifestError(f"Run {self.run_id} has no artifact {name!r}", artifact=name)
        path = root / self.artifacts[name]
        if not path.exists():
            raise ManifestError(f"Artifact file missing: {path}", artifact=name, path=str(path))
        return path
