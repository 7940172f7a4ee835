"""Uniform prediction interface over the four surrogate families."""

from collections.abc import Sequence
from typing import Protocol

import numpy as np

from thermocline_twin.exceptions import ParameterError, ThermoTwinError
from thermocline_twin.models.data import Dataset, RngStream, Trajectory
from thermocline_twin.models.mvg import CoefficientEnsemble, MvgModel
from thermocline_twin.models.neural import FnnModel, GruModel, TrainConfig
from thermocline_twin.models.sindyc import LinearModel, RolloutConfig, StlsqConfig
from thermocline_twin.services.mvg import fit_mvg
from thermocline_twin.services.neural import predict_many, predict_trajectory, train_surrogate
from thermocline_twin.services.sindyc import fit_sindyc, rollout_on
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)


class Surrogate(Protocol):
    """Anything that predicts the GHX states of a trajectory from its controls."""

    def predict(self, traj: Trajectory) -> np.ndarray: ...

    def predict_many(self, trajs: Sequence[Trajectory]) -> list[np.ndarray | ThermoTwinError]: ...


class _OneByOne:
    def predict(self, traj: Trajectory) -> np.ndarray:
        raise NotImplementedError

    def predict_many(self, trajs: Sequence[Trajectory]) -> list[np.ndarray | ThermoTwinError]:
        """Per-trajectory predictions; failures are returned in place."""
        results: list[np.ndarray | ThermoTwinError] = []
        for traj in trajs:
            try:
                results.append(self.predict(traj))
            except ThermoTwinError as e:
                results.append(e)
        return results


class LinearSurrogate(_OneByOne):
    def __init__(self, model: LinearModel, rcfg: RolloutConfig | None = None) -> None:
        self.model = model
        self.rcfg = rcfg

    def predict(self, traj: Trajectory) -> np.ndarray:
        return rollout_on(self.model, traj, self.rcfg)


class MvgSurrogate(LinearSurrogate):
    """Point predictions of the Gaussian's mean coefficient vector."""

    def __init__(self, mvg: MvgModel, rcfg: RolloutConfig | None = None) -> None:
        super().__init__(mvg.mean_model(), rcfg)
        self.mvg = mvg


class FnnSurrogate(_OneByOne):
    def __init__(self, model: FnnModel) -> None:
        self.model = model

    def predict(self, traj: Trajectory) -> np.ndarray:
        return predict_trajectory(self.model, traj.controls, traj.ghx[:1], traj.grid)


class GruSurrogate(_OneByOne):
    """Autoregressive rollouts warm-started on each trajectory's first ``lookback`` states."""

    def __init__(self, model: GruModel) -> None:
        self.model = model

    def predict(self, traj: Trajectory) -> np.ndarray:
        return predict_trajectory(
            self.model, traj.controls, traj.ghx[: self.model.lookback], traj.grid
        )

    def predict_many(self, trajs: Sequence[Trajectory]) -> list[np.ndarray | ThermoTwinError]:
        if not trajs:
            return []
        try:
            batched = predict_many(
                self.model,
                [t.controls for t in trajs],
                [t.ghx[: self.model.lookback] for t in trajs],
            )
        except ThermoTwinError as e:
            logger.debug(f"Batched GRU prediction failed ({e.message}); retrying one by one")
            return super().predict_many(trajs)
        return list(batched)


class BranchTrainer:
    """Builds a branch's surrogate from the currently selected items.

    For the trajectory branches the items are trajectory ids of ``pool``; for
    the MvG branch they are model ids of ``ensemble``.
    """

    def __init__(
        self,
        stlsq: StlsqConfig | None = None,
        rollout: RolloutConfig | None = None,
        fnn: TrainConfig | None = None,
        gru: TrainConfig | None = None,
        shrinkage: float | None = None,
    ) -> None:
        self.stlsq = stlsq or StlsqConfig.ghx()
        self.rollout = rollout or RolloutConfig(method="exact")
        self.fnn = fnn or TrainConfig.fnn_desk()
        self.gru = gru or TrainConfig.gru_desk()
        self.shrinkage = shrinkage

    def fit(
        self,
        branch: str,
        selected: tuple[int, ...],
        pool: Dataset | None = None,
        ensemble: CoefficientEnsemble | None = None,
        stream: RngStream | None = None,
    ) -> Surrogate:
        if branch == "mvg":
            if ensemble is None:
                raise ParameterError("The MvG branch needs a candidate ensemble")
            return MvgSurrogate(fit_mvg(ensemble.subset(selected), self.shrinkage), self.rollout)
        if pool is None:
            raise ParameterError(f"The {branch} branch needs a trajectory pool")
        subset = pool.subset(selected)
        if branch == "sindyc":
            return LinearSurrogate(fit_sindyc(subset, self.stlsq), self.rollout)
        if branch == "fnn":
            model = train_surrogate("fnn", subset, self.fnn, stream)
            assert isinstance(model, FnnModel)
            return FnnSurrogate(model)
        if branch == "gru":
            model = train_surrogate("gru", subset, self.gru, stream)
            assert isinstance(model, GruModel)
            return GruSurrogate(model)
        raise ParameterError(f"Unknown branch {branch!r}")
