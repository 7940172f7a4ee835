"""Trajectory prediction with trained networks."""

from collections.abc import Sequence

import numpy as np

from thermocline_twin.exceptions import DataError, ShapeError
from thermocline_twin.models.data import TimeGrid, Trajectory
from thermocline_twin.models.neural import FnnModel, GruModel
from thermocline_twin.services.neural.networks import fnn_forward, gru_pass


def _check_controls(controls: np.ndarray, grid: TimeGrid | None) -> np.ndarray:
    controls = np.asarray(controls, dtype=float)
    if controls.ndim != 2:
        raise ShapeError(f"Controls must be a 2-D array, got shape {controls.shape}")
    if grid is not None and controls.shape[0] != grid.n_steps:
        raise ShapeError(
            f"Controls have {controls.shape[0]} rows but the grid has {grid.n_steps} steps"
        )
    return controls


def _predict_fnn(
    model: FnnModel, controls: np.ndarray, warm_start: np.ndarray | None
) -> np.ndarray:
    if not model.one_step:
        return fnn_forward(model, controls)
    out = np.empty((controls.shape[0], model.layer_dims[-1]))
    out[1:] = fnn_forward(model, controls[:-1])
    out[0] = warm_start[0] if warm_start is not None else fnn_forward(model, controls[0])
    return out


def predict_many(
    model: GruModel,
    controls: Sequence[np.ndarray],
    warm_starts: Sequence[np.ndarray],
) -> list[np.ndarray]:
    """Autoregressive GRU rollout of several equal-length sequences in one batch.

    Every sequence keeps its warm-start rows and continues from its last
    ``lookback`` states, feeding predictions back into the window.
    """
    if len(controls) != len(warm_starts):
        raise ShapeError("Need one warm start per control sequence")
    if not controls:
        return []
    U = np.stack([np.asarray(c, dtype=float) for c in controls])
    lengths = {np.asarray(w).shape[0] for w in warm_starts}
    if len(lengths) != 1:
        raise ShapeError("Batched warm starts must share a length")
    warm = lengths.pop()
    if warm < model.lookback:
        raise DataError(
            f"GRU needs a warm start of at least {model.lookback} states, got {warm}",
            lookback=model.lookback,
            warm_start=warm,
        )
    m, n_steps, _ = U.shape
    if warm > n_steps:
        raise ShapeError(f"Warm start of {warm} rows exceeds the {n_steps}-step horizon")
    states = np.empty((m, n_steps, model.output_dim))
    states[:, :warm] = np.stack([np.asarray(w, dtype=float) for w in warm_starts])
    params = dict(model.params)
    lookback = model.lookback
    for k in range(warm, n_steps):
        window = np.concatenate(
            [states[:, k - lookback : k], U[:, k - lookback + 1 : k + 1]], axis=2
        )
        out, _ = gru_pass(params, model.hidden_dims, model.input_norm.normalize(window))
        states[:, k] = model.output_norm.denormalize(out)
    return list(states)


def predict_trajectory(
    model: FnnModel | GruModel,
    controls: np.ndarray,
    warm_start: np.ndarray | None = None,
    grid: TimeGrid | None = None,
) -> np.ndarray:
    """Predicted GHX sequence for a control sequence.

    The FNN maps controls pointwise. The GRU copies ``warm_start`` (at least
    ``lookback`` true states) and rolls forward on its own predictions.
    """
    controls = _check_controls(controls, grid)
    if isinstance(model, FnnModel):
        return _predict_fnn(model, controls, warm_start)
    if warm_start is None:
        raise DataError("GRU prediction requires a warm-start window of true states")
    return predict_many(model, [controls], [warm_start])[0]


def one_step_predictions(model: GruModel, traj: Trajectory) -> np.ndarray:
    """One-step GRU predictions on true windows; rows before ``lookback`` are the truth."""
    if traj.n_steps <= model.lookback:
        raise DataError(
            f"Trajectory {traj.id} is not longer than the lookback of {model.lookback}",
            trajectory_ids=[traj.id],
        )
    features = model.input_norm.normalize(np.hstack([traj.ghx[:-1], traj.controls[1:]]))
    starts = np.arange(traj.n_steps - model.lookback)
    windows = np.stack([features[s : s + model.lookback] for s in starts])
    out, _ = gru_pass(dict(model.params), model.hidden_dims, windows)
    pred = traj.ghx.copy()
    pred[model.lookback :] = model.output_norm.denormalize(out)
    return pred
