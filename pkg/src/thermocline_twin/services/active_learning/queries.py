"""Query strategies: coefficient-space distance, prediction error and random picks."""

from collections.abc import Sequence

import numpy as np

from thermocline_twin.exceptions import ParameterError, ShapeError, ThermoTwinError
from thermocline_twin.models.active_learning import PredictionErrorStrategy
from thermocline_twin.models.data import GHX_CHANNELS, Dataset, RngStream, Trajectory
from thermocline_twin.models.mvg import CoefficientEnsemble
from thermocline_twin.models.sindyc import RolloutConfig
from thermocline_twin.services.active_learning.surrogates import Surrogate
from thermocline_twin.services.data import channel_rmse
from thermocline_twin.services.mvg import mahalanobis_many
from thermocline_twin.services.sindyc import rollout_on
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)


def _check_batch(batch: int) -> None:
    if batch < 1:
        raise ParameterError(f"Query batch must be at least 1, got {batch}", batch=batch)


def rank_ascending(ids: Sequence[int], scores: np.ndarray) -> list[int]:
    """Ids by increasing score, ties by increasing id."""
    ids_arr = np.asarray(ids)
    return [int(i) for i in ids_arr[np.lexsort((ids_arr, scores))]]


def rank_descending(ids: Sequence[int], scores: np.ndarray) -> list[int]:
    """Ids by decreasing score, ties by increasing id."""
    return rank_ascending(ids, -np.asarray(scores, dtype=float))


def query_mahalanobis(
    pool: CoefficientEnsemble,
    selected: Sequence[int],
    reference: np.ndarray,
    batch: int,
    covariance: np.ndarray,
) -> list[int]:
    """The ``batch`` unselected models closest to ``reference`` under ``covariance``.

    Raises:
        SingularityError: when ``covariance`` cannot be factorized.
    """
    _check_batch(batch)
    chosen = set(selected)
    candidates = [i for i in pool.model_ids if i not in chosen]
    if not candidates:
        return []
    vectors = np.vstack([pool.vector(i) for i in candidates])
    distances = mahalanobis_many(vectors, reference, covariance)
    return rank_ascending(candidates, distances)[:batch]


def channel_scales(pool: Dataset, channels: Sequence[str] = GHX_CHANNELS) -> np.ndarray:
    """Pool-wide standard deviation per channel; zero spread maps to 1."""
    columns = [GHX_CHANNELS.index(c) for c in channels]
    values = np.vstack([traj.ghx[:, columns] for traj in pool.trajectories])
    scales = values.std(axis=0)
    return np.where(scales > 0, scales, 1.0)


def prediction_errors(
    surrogate: Surrogate,
    trajs: Sequence[Trajectory],
    scales: np.ndarray,
    channels: Sequence[str] = GHX_CHANNELS,
) -> np.ndarray:
    """Sum of scaled channel RMSEs per trajectory; failed predictions score ``inf``."""
    columns = [GHX_CHANNELS.index(c) for c in channels]
    scores = np.empty(len(trajs))
    for k, (traj, pred) in enumerate(zip(trajs, surrogate.predict_many(trajs))):
        if isinstance(pred, ThermoTwinError):
            logger.warning(
                f"Prediction failed on trajectory {traj.id} ({pred.message}); "
                "treating it as maximally informative"
            )
            scores[k] = np.inf
            continue
        errors = channel_rmse(pred[:, columns], traj.ghx[:, columns])
        scores[k] = float(np.sum(errors / scales)) if np.all(np.isfinite(errors)) else np.inf
    return scores


def query_by_error(
    surrogate: Surrogate,
    pool: Dataset,
    batch: int,
    strategy: PredictionErrorStrategy | None = None,
    scales: np.ndarray | None = None,
) -> list[int]:
    """The ``batch`` pool trajectories with the largest scaled prediction error.

    Channels are divided by their pool-wide standard deviation before summing
    unless explicit ``scales`` are given.
    """
    _check_batch(batch)
    strategy = strategy or PredictionErrorStrategy()
    channels = strategy.target_channels
    if scales is None:
        scales = channel_scales(pool, channels)
    elif len(scales) != len(channels):
        raise ShapeError(f"Need {len(channels)} channel scales, got {len(scales)}")
    scores = prediction_errors(surrogate, pool.trajectories, scales, channels)
    return rank_descending(pool.ids, scores)[:batch]


def query_models_by_error(
    pool: CoefficientEnsemble,
    selected: Sequence[int],
    experiment: Trajectory,
    batch: int,
    rcfg: RolloutConfig | None = None,
    strategy: PredictionErrorStrategy | None = None,
) -> list[int]:
    """Unselected candidate models whose own rollouts miss ``experiment`` the most."""
    _check_batch(batch)
    strategy = strategy or PredictionErrorStrategy()
    columns = [GHX_CHANNELS.index(c) for c in strategy.target_channels]
    scales = experiment.ghx[:, columns].std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    chosen = set(selected)
    candidates = [i for i in pool.model_ids if i not in chosen]
    scores = np.empty(len(candidates))
    for k, model_id in enumerate(candidates):
        try:
            pred = rollout_on(pool.model(model_id), experiment, rcfg)
        except ThermoTwinError as e:
            logger.warning(f"Rollout of candidate model {model_id} failed: {e.message}")
            scores[k] = np.inf
            continue
        scores[k] = float(np.sum(channel_rmse(pred[:, columns], experiment.ghx[:, columns]) / scales))
    return rank_descending(candidates, scores)[:batch]


def query_random(candidates: Sequence[int], batch: int, stream: RngStream) -> list[int]:
    """``batch`` distinct ids drawn uniformly from ``candidates`` (sorted first)."""
    _check_batch(batch)
    ordered = sorted(candidates)
    if not ordered:
        return []
    picks = stream.generator().choice(len(ordered), size=min(batch, len(ordered)), replace=False)
    return [ordered[int(i)] for i in picks]
