"""Query strategies, loop settings and the active-learning state."""

from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from thermocline_twin.exceptions import DataError, ParameterError
from thermocline_twin.models.base import FloatArray, FrozenModel
from thermocline_twin.models.data import GHX_CHANNELS, RngStream

Branch = Literal["mvg", "sindyc", "fnn", "gru"]
BRANCHES: tuple[Branch, ...] = ("mvg", "sindyc", "fnn", "gru")


class MahalanobisStrategy(FrozenModel):
    """Pick candidate models closest to a reference coefficient vector.

    Without an explicit ``reference`` the loop uses the model identified on the
    pseudo-experiment.
    """

    kind: Literal["mahalanobis"] = "mahalanobis"
    reference: FloatArray | None = None
    covariance_source: Literal["pool", "selected"] = "pool"


class PredictionErrorStrategy(FrozenModel):
    """Pick the candidates the current surrogate predicts worst."""

    kind: Literal["prediction_error"] = "prediction_error"
    metric: Literal["rmse"] = "rmse"
    target_channels: tuple[str, ...] = GHX_CHANNELS

    @model_validator(mode="after")
    def _check_channels(self) -> "PredictionErrorStrategy":
        unknown = [c for c in self.target_channels if c not in GHX_CHANNELS]
        if unknown or not self.target_channels:
            raise ParameterError(f"Unknown or empty target channels: {unknown}")
        return self


class RandomStrategy(FrozenModel):
    """Uniform random picks, the baseline arm."""

    kind: Literal["random"] = "random"
    stream: RngStream | None = None


QueryStrategy = Annotated[
    MahalanobisStrategy | PredictionErrorStrategy | RandomStrategy,
    Field(discriminator="kind"),
]


class AlLoopConfig(BaseModel):
    """Round structure of one active-learning arm."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    init_size: int = Field(default=4, ge=1)
    batch_size: int = Field(default=5, ge=1)
    max_rounds: int = Field(default=10, ge=0)
    patience: int = Field(default=5, ge=1)
    min_improvement: float = Field(default=0.01, ge=0)
    early_stop: bool = True

    @classmethod
    def for_branch(cls, branch: Branch, **overrides: object) -> "AlLoopConfig":
        """Default sizes: 20 initial / 10 per round for MvG, 4 / 5 otherwise."""
        defaults: dict[str, object] = (
            {"init_size": 20, "batch_size": 10} if branch == "mvg" else {"init_size": 4, "batch_size": 5}
        )
        return cls(**{**defaults, **overrides})


class AlRecord(BaseModel):
    """One row of an arm's history."""

    model_config = ConfigDict(frozen=True)

    round: int = Field(ge=0)
    n_selected: int = Field(ge=0)
    added_ids: tuple[int, ...] = ()
    rmse: tuple[float, ...]
    rmse_exp: tuple[float, ...] | None = None
    wall_s: float = Field(ge=0)
    failed: bool = False
    error: str | None = None

    def score(self, scales: np.ndarray) -> float:
        """Scale-free eval error: channel RMSEs divided by ``scales`` and summed."""
        return float(np.sum(np.asarray(self.rmse) / scales))


class AlState(BaseModel):
    """Selected ids, remaining candidates and the per-round history."""

    model_config = ConfigDict(frozen=True)

    selected: tuple[int, ...]
    pool: tuple[int, ...]
    iteration: int = Field(default=0, ge=0)
    history: tuple[AlRecord, ...] = ()

    @model_validator(mode="after")
    def _check_partition(self) -> "AlState":
        if len(set(self.selected)) != len(self.selected):
            raise DataError("An id was selected twice")
        overlap = set(self.selected) & set(self.pool)
        if overlap:
            raise DataError(f"Ids {sorted(overlap)} are both selected and in the pool")
        return self

    @property
    def universe(self) -> frozenset[int]:
        return frozenset(self.selected) | frozenset(self.pool)

    def advance(self, added: tuple[int, ...], record: AlRecord) -> "AlState":
        missing = [i for i in added if i not in self.pool]
        if missing:
            raise DataError(f"Ids {missing} are not in the candidate pool")
        chosen = set(added)
        return AlState(
            selected=self.selected + tuple(added),
            pool=tuple(i for i in self.pool if i not in chosen),
            iteration=self.iteration + 1,
            history=self.history + (record,),
        )

    def record(self, record: AlRecord) -> "AlState":
        return self.model_copy(update={"history": self.history + (record,)})
