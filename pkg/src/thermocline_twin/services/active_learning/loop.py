"""The active-learning loop shared by all four surrogate branches."""

import math
import time
from dataclasses import dataclass
from typing import Literal

import numpy as np

from thermocline_twin.exceptions import ParameterError, ThermoTwinError
from thermocline_twin.models.active_learning import (
    AlLoopConfig,
    AlRecord,
    AlState,
    Branch,
    MahalanobisStrategy,
    PredictionErrorStrategy,
    QueryStrategy,
    RandomStrategy,
)
from thermocline_twin.models.data import Dataset, RngStream, Trajectory
from thermocline_twin.models.mvg import CoefficientEnsemble
from thermocline_twin.services.active_learning.queries import (
    channel_scales,
    query_by_error,
    query_mahalanobis,
    query_models_by_error,
    query_random,
)
from thermocline_twin.services.active_learning.surrogates import (
    BranchTrainer,
    MvgSurrogate,
    Surrogate,
)
from thermocline_twin.services.data import channel_rmse
from thermocline_twin.services.mvg import fit_mvg
from thermocline_twin.utils import logging_service

Timing = Literal["wall", "off"]


@dataclass(frozen=True)
class AlInputs:
    """Immutable inputs shared by the arms of a comparison.

    ``pool`` holds the candidate trajectories of the trajectory branches;
    ``ensemble`` holds the candidate models of the MvG branch.
    """

    pool: Dataset
    eval_set: Dataset
    experiment: Trajectory | None = None
    ensemble: CoefficientEnsemble | None = None
    reference: np.ndarray | None = None


def evaluate_surrogate(
    surrogate: Surrogate, eval_set: Dataset, experiment: Trajectory | None = None
) -> tuple[tuple[float, ...], tuple[float, ...] | None]:
    """Pooled per-channel RMSE over ``eval_set`` and, if given, on ``experiment``."""
    preds = surrogate.predict_many(eval_set.trajectories)
    for pred in preds:
        if isinstance(pred, ThermoTwinError):
            raise pred
    stacked_pred = np.vstack(preds)  # type: ignore[arg-type]
    stacked_true = np.vstack([t.ghx for t in eval_set.trajectories])
    rmse = tuple(float(v) for v in channel_rmse(stacked_pred, stacked_true))
    rmse_exp = None
    if experiment is not None:
        exp_pred = surrogate.predict(experiment)
        rmse_exp = tuple(float(v) for v in channel_rmse(exp_pred, experiment.ghx))
    return rmse, rmse_exp


class ActiveLearningRunner:
    """Runs one arm: initial fit, then query, refit and evaluate per round."""

    def __init__(self, trainer: BranchTrainer | None = None, timing: Timing = "wall") -> None:
        self.trainer = trainer or BranchTrainer()
        self.timing = timing
        self.logger = logging_service.get_logger(__name__)
        self._pool_covariance: np.ndarray | None = None

    def _elapsed(self, start: float) -> float:
        return time.perf_counter() - start if self.timing == "wall" else 0.0

    def _fit(
        self, branch: Branch, selected: tuple[int, ...], inputs: AlInputs, stream: RngStream
    ) -> Surrogate:
        return self.trainer.fit(branch, selected, inputs.pool, inputs.ensemble, stream)

    def _query(
        self,
        branch: Branch,
        strategy: QueryStrategy,
        state: AlState,
        surrogate: Surrogate,
        inputs: AlInputs,
        batch: int,
        stream: RngStream,
    ) -> list[int]:
        if isinstance(strategy, RandomStrategy):
            return query_random(state.pool, batch, (strategy.stream or stream).child(f"round{state.iteration + 1}"))
        if isinstance(strategy, MahalanobisStrategy):
            if branch != "mvg" or inputs.ensemble is None:
                raise ParameterError("Mahalanobis queries need the MvG branch and its ensemble")
            reference = strategy.reference if strategy.reference is not None else inputs.reference
            if reference is None:
                raise ParameterError("Mahalanobis queries need a reference coefficient vector")
            if strategy.covariance_source == "selected":
                assert isinstance(surrogate, MvgSurrogate)
                covariance = surrogate.mvg.covariance
            else:
                if self._pool_covariance is None:
                    self._pool_covariance = fit_mvg(inputs.ensemble, self.trainer.shrinkage).covariance
                covariance = self._pool_covariance
            return query_mahalanobis(inputs.ensemble, state.selected, reference, batch, covariance)
        assert isinstance(strategy, PredictionErrorStrategy)
        if branch == "mvg":
            if inputs.ensemble is None or inputs.experiment is None:
                raise ParameterError("Error queries over models need the ensemble and an experiment")
            return query_models_by_error(
                inputs.ensemble, state.selected, inputs.experiment, batch, self.trainer.rollout, strategy
            )
        scales = channel_scales(inputs.pool, strategy.target_channels)
        return query_by_error(surrogate, inputs.pool.subset(state.pool), batch, strategy, scales)

    def run(
        self,
        branch: Branch,
        strategy: QueryStrategy,
        cfg: AlLoopConfig,
        inputs: AlInputs,
        stream: RngStream,
        init_stream: RngStream,
    ) -> AlState:
        """Run the arm and return its final state.

        ``init_stream`` draws the initial selection and should be shared by the
        arms of a comparison; ``stream`` feeds this arm's random picks and training.
        """
        if branch == "mvg":
            if inputs.ensemble is None:
                raise ParameterError("The MvG branch needs a candidate ensemble")
            if cfg.init_size < 2:
                raise ParameterError("The MvG branch needs at least 2 initial models")
            universe: tuple[int, ...] = inputs.ensemble.model_ids
        else:
            universe = inputs.pool.ids
        if cfg.init_size > len(universe):
            raise ParameterError(
                f"Initial size {cfg.init_size} exceeds the {len(universe)} candidates"
            )

        begin = time.perf_counter()
        self._pool_covariance = None
        initial = tuple(query_random(universe, cfg.init_size, init_stream))
        chosen = set(initial)
        state = AlState(selected=initial, pool=tuple(i for i in universe if i not in chosen))
        self.logger.info(
            f"AL {branch}/{strategy.kind}: {len(initial)} initial, up to {cfg.max_rounds} rounds "
            f"of {cfg.batch_size} from {len(universe)} candidates"
        )

        start = time.perf_counter()
        surrogate = self._fit(branch, state.selected, inputs, stream.child("train/round0"))
        failed, error = False, None
        try:
            rmse, rmse_exp = evaluate_surrogate(surrogate, inputs.eval_set, inputs.experiment)
        except ThermoTwinError as e:
            self.logger.warning(f"AL {branch}: initial model could not be evaluated ({e.message})")
            rmse, rmse_exp = (math.inf, math.inf), None
            failed, error = True, e.message
        state = state.record(
            AlRecord(
                round=0,
                n_selected=len(state.selected),
                added_ids=initial,
                rmse=rmse,
                rmse_exp=rmse_exp,
                wall_s=self._elapsed(start),
                failed=failed,
                error=error,
            )
        )

        scales = channel_scales(inputs.eval_set)
        best = state.history[-1].score(scales)
        stale = 0
        for round_index in range(1, cfg.max_rounds + 1):
            if not state.pool:
                self.logger.info(f"AL {branch}: candidate pool exhausted after {round_index - 1} rounds")
                break
            start = time.perf_counter()
            added = tuple(self._query(branch, strategy, state, surrogate, inputs, cfg.batch_size, stream))
            failed, error = False, None
            try:
                candidate = self._fit(
                    branch, state.selected + added, inputs, stream.child(f"train/round{round_index}")
                )
                rmse, rmse_exp = evaluate_surrogate(candidate, inputs.eval_set, inputs.experiment)
                surrogate = candidate
            except ThermoTwinError as e:
                self.logger.warning(
                    f"AL {branch} round {round_index} failed ({e.message}); keeping the previous model"
                )
                failed, error = True, e.message
            record = AlRecord(
                round=round_index,
                n_selected=len(state.selected) + len(added),
                added_ids=added,
                rmse=rmse,
                rmse_exp=rmse_exp,
                wall_s=self._elapsed(start),
                failed=failed,
                error=error,
            )
            state = state.advance(added, record)
            self.logger.debug(
                f"AL {branch} round {round_index}: {record.n_selected} selected, rmse {record.rmse}"
            )

            score = record.score(scales)
            if not failed and score < best * (1.0 - cfg.min_improvement):
                best, stale = score, 0
            else:
                stale += 1
            if cfg.early_stop and stale >= cfg.patience:
                self.logger.info(
                    f"AL {branch}: no improvement above {cfg.min_improvement:.0%} "
                    f"for {cfg.patience} rounds, stopping"
                )
                break

        self.logger.info(
            f"AL {branch}/{strategy.kind} completed in {time.perf_counter() - begin:.2f} seconds "
            f"({len(state.history)} records, {len(state.selected)} selected)"
        )
        return state


def run_al_loop(
    branch: Branch,
    strategy: QueryStrategy,
    cfg: AlLoopConfig,
    inputs: AlInputs,
    stream: RngStream,
    init_stream: RngStream | None = None,
    trainer: BranchTrainer | None = None,
    timing: Timing = "wall",
) -> AlState:
    """Functional entry point for a single arm (see :class:`ActiveLearningRunner`)."""
    init_stream = init_stream or stream.child("init")
    return ActiveLearningRunner(trainer, timing).run(branch, strategy, cfg, inputs, stream, init_stream)
