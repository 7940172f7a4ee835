"""Supervised pair construction and the FNN / GRU training loop."""

import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from thermocline_twin.exceptions import DataError, DivergenceError, ShapeError
from thermocline_twin.models.data import Dataset, RngStream, Trajectory
from thermocline_twin.models.neural import (
    FnnModel,
    GruModel,
    NeuralModel,
    Normalizer,
    TrainConfig,
)
from thermocline_twin.services.neural.networks import (
    Params,
    init_fnn,
    init_gru,
    loss_and_gradients,
)
from thermocline_twin.services.neural.optim import AdamOptimizer
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

SurrogateKind = Literal["fnn", "gru"]

GRU_FEATURES = 6


def gru_features(ghx: np.ndarray, controls: np.ndarray) -> np.ndarray:
    """Per-step GRU input rows ``[ghx(k), controls(k + 1)]`` for ``k = 0 .. n - 2``.

    Each row pairs a state with the actuator setting of the step being predicted.
    """
    return np.hstack([ghx[:-1], controls[1:]])


@dataclass
class PointPairs:
    """Row-aligned FNN inputs, targets and sample weights (physical units)."""

    inputs: np.ndarray
    targets: np.ndarray
    weights: np.ndarray


@dataclass
class WindowPairs:
    """GRU windows gathered lazily from per-trajectory feature blocks.

    ``index`` rows are ``(block, start)``; window ``features[block][start:start + L]``
    predicts ``targets[block][start + L - 1]``.
    """

    features: list[np.ndarray]
    targets: list[np.ndarray]
    block_weights: np.ndarray
    lookback: int
    index: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=int))

    def __len__(self) -> int:
        return int(self.index.shape[0])

    def gather(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        picks = self.index[rows]
        X = np.stack(
            [self.features[b][s : s + self.lookback] for b, s in picks]
        )
        Y = np.stack([self.targets[b][s + self.lookback - 1] for b, s in picks])
        return X, Y, self.block_weights[picks[:, 0]]


def _labelled(
    train: Dataset, extra: Dataset | None, weight: float
) -> list[tuple[Trajectory, float]]:
    items = [(traj, 1.0) for traj in train.trajectories]
    if extra is not None:
        items += [(traj, weight) for traj in extra.trajectories]
    return items


def point_pairs(
    train: Dataset,
    one_step: bool = False,
    extra: Dataset | None = None,
    experiment_weight: float = 1.0,
) -> PointPairs:
    """Controls to GHX state pairs, same step or one step ahead."""
    inputs, targets, weights = [], [], []
    for traj, weight in _labelled(train, extra, experiment_weight):
        if one_step:
            inputs.append(traj.controls[:-1])
            targets.append(traj.ghx[1:])
        else:
            inputs.append(traj.controls)
            targets.append(traj.ghx)
        weights.append(np.full(inputs[-1].shape[0], weight))
    return PointPairs(np.vstack(inputs), np.vstack(targets), np.concatenate(weights))


def window_pairs(
    train: Dataset,
    lookback: int,
    stride: int = 1,
    extra: Dataset | None = None,
    experiment_weight: float = 1.0,
) -> WindowPairs:
    """Sliding GRU windows over every trajectory (physical units)."""
    items = _labelled(train, extra, experiment_weight)
    short = [traj.id for traj, _ in items if traj.n_steps <= lookback]
    if short:
        raise DataError(
            f"Trajectories {short} are not longer than the lookback of {lookback}",
            trajectory_ids=short,
            lookback=lookback,
        )
    features, targets, index = [], [], []
    for block, (traj, _) in enumerate(items):
        features.append(gru_features(traj.ghx, traj.controls))
        targets.append(traj.ghx[1:])
        starts = np.arange(0, traj.n_steps - lookback, stride)
        index.append(np.column_stack([np.full(starts.size, block), starts]))
    return WindowPairs(
        features=features,
        targets=targets,
        block_weights=np.array([weight for _, weight in items]),
        lookback=lookback,
        index=np.vstack(index),
    )


def _apply_step(
    model: FnnModel | GruModel,
    params: Params,
    X: np.ndarray,
    Y: np.ndarray,
    optimizer: AdamOptimizer,
    weights: np.ndarray | None,
    epoch: int | None,
    batch_index: int | None,
) -> tuple[Params, float]:
    loss, grads = loss_and_gradients(model, X, Y, weights, params)
    if not np.isfinite(loss):
        raise DivergenceError(
            f"Training loss became non-finite at epoch {epoch}, batch {batch_index}",
            epoch=epoch,
            batch=batch_index,
        )
    return optimizer.step(params, grads), loss


def backward_and_step(
    model: FnnModel | GruModel,
    batch: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    optimizer: AdamOptimizer | None = None,
    weights: np.ndarray | None = None,
    epoch: int | None = None,
    batch_index: int | None = None,
) -> tuple[FnnModel | GruModel, float]:
    """One Adam step on a normalized ``(inputs, targets)`` batch.

    Returns the updated model and the batch loss measured before the step.
    """
    X, Y = batch
    if X.shape[0] == 0:
        raise ShapeError("Cannot step on an empty batch")
    optimizer = optimizer or AdamOptimizer(cfg)
    params, loss = _apply_step(
        model, dict(model.params), X, Y, optimizer, weights, epoch, batch_index
    )
    return model.with_params(params), loss


class _Batches:
    """Normalized minibatch source over point pairs or windows."""

    def __init__(
        self,
        pairs: PointPairs | WindowPairs,
        input_norm: Normalizer,
        output_norm: Normalizer,
    ) -> None:
        self.pairs = pairs
        self.input_norm = input_norm
        self.output_norm = output_norm
        if isinstance(pairs, PointPairs):
            self._X = input_norm.normalize(pairs.inputs)
            self._Y = output_norm.normalize(pairs.targets)
        else:
            pairs.features = [input_norm.normalize(block) for block in pairs.features]
            pairs.targets = [output_norm.normalize(block) for block in pairs.targets]

    def __len__(self) -> int:
        if isinstance(self.pairs, PointPairs):
            return int(self._X.shape[0])
        return len(self.pairs)

    def take(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if isinstance(self.pairs, PointPairs):
            return self._X[rows], self._Y[rows], self.pairs.weights[rows]
        return self.pairs.gather(rows)

    def mean_target(self) -> np.ndarray:
        if isinstance(self.pairs, PointPairs):
            return np.asarray(self._Y.mean(axis=0))
        return np.asarray(np.vstack(self.pairs.targets).mean(axis=0))


def _initial_model(
    kind: SurrogateKind,
    pairs: PointPairs | WindowPairs,
    cfg: TrainConfig,
    stream: RngStream,
) -> tuple[FnnModel | GruModel, _Batches]:
    hidden = (cfg.hidden_width,) * cfg.hidden_layers
    if isinstance(pairs, PointPairs):
        input_norm = Normalizer.fit(pairs.inputs)
        output_norm = Normalizer.fit(pairs.targets)
        batches = _Batches(pairs, input_norm, output_norm)
        model: FnnModel | GruModel = init_fnn(
            (pairs.inputs.shape[1], *hidden, pairs.targets.shape[1]),
            stream.child("init"),
            input_norm,
            output_norm,
            one_step=cfg.fnn_one_step,
            output_bias=batches.mean_target(),
            cfg=cfg,
        )
        return model, batches
    input_norm = Normalizer.fit(np.vstack(pairs.features))
    output_norm = Normalizer.fit(np.vstack(pairs.targets), mode="minmax")
    batches = _Batches(pairs, input_norm, output_norm)
    model = init_gru(
        GRU_FEATURES,
        hidden,
        output_norm.width,
        pairs.lookback,
        stream.child("init"),
        input_norm,
        output_norm,
        output_bias=batches.mean_target(),
        cfg=cfg,
    )
    return model, batches


def train_surrogate(
    kind: SurrogateKind,
    train: Dataset,
    cfg: TrainConfig,
    stream: RngStream | None = None,
    extra: Dataset | None = None,
) -> NeuralModel:
    """Train an FNN or GRU on ``train`` (plus optional weighted ``extra`` data).

    Initialization and the per-epoch shuffle both derive from ``stream``, so a
    fixed seed fixes the whole loss curve.
    """
    if len(train) == 0:
        raise DataError("Cannot train on an empty dataset")
    stream = stream or RngStream(seed=cfg.seed, stream_label=f"train/{kind}")
    start = time.perf_counter()
    if kind == "fnn":
        pairs: PointPairs | WindowPairs = point_pairs(
            train, cfg.fnn_one_step, extra, cfg.experiment_weight
        )
    else:
        pairs = window_pairs(train, cfg.lookback, cfg.window_stride, extra, cfg.experiment_weight)
    model, batches = _initial_model(kind, pairs, cfg, stream)
    logger.info(
        f"Training {kind} on {len(batches)} samples from {len(train)} trajectories "
        f"({cfg.epochs} epochs, batch {cfg.batch_size})"
    )

    optimizer = AdamOptimizer(cfg)
    shuffle = stream.child("shuffle").generator()
    params = dict(model.params)
    losses = []
    for epoch in range(cfg.epochs):
        order = shuffle.permutation(len(batches))
        total, seen = 0.0, 0
        for batch_index, begin in enumerate(range(0, len(batches), cfg.batch_size)):
            X, Y, weights = batches.take(order[begin : begin + cfg.batch_size])
            params, loss = _apply_step(
                model, params, X, Y, optimizer, weights, epoch, batch_index
            )
            total += loss * X.shape[0]
            seen += X.shape[0]
        losses.append(total / seen)
        logger.debug(f"{kind} epoch {epoch + 1}/{cfg.epochs}: loss {losses[-1]:.6g}")

    trained = model.with_params(params, training_losses=tuple(losses))
    logger.info(
        f"Training {kind} completed in {time.perf_counter() - start:.2f} seconds "
        f"(final loss {losses[-1]:.6g})"
    )
    return trained
