"""Forward and backward passes of the numpy FNN and GRU.

All functions here work in normalized feature space on batches: FNN inputs are
``(m, d)``, GRU windows ``(m, lookback, d)``.
"""

from dataclasses import dataclass

import numpy as np

from thermocline_twin.exceptions import NumericError, ShapeError
from thermocline_twin.models.data import RngStream
from thermocline_twin.models.neural import FnnModel, GruModel, Normalizer, TrainConfig

Params = dict[str, np.ndarray]


def sigmoid(x: np.ndarray) -> np.ndarray:
    return np.asarray(0.5 * (1.0 + np.tanh(0.5 * x)))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


# FNN


@dataclass
class FnnCache:
    activations: list[np.ndarray]
    pre_activations: list[np.ndarray]


def fnn_pass(params: Params, n_layers: int, X: np.ndarray) -> tuple[np.ndarray, FnnCache]:
    """Affine layers with rectifiers between them; the output layer is linear."""
    activations = [X]
    pre_activations = []
    hidden = X
    for layer in range(n_layers):
        z = hidden @ params[f"W{layer}"] + params[f"b{layer}"]
        pre_activations.append(z)
        hidden = relu(z) if layer < n_layers - 1 else z
        activations.append(hidden)
    return hidden, FnnCache(activations, pre_activations)


def fnn_gradients(params: Params, n_layers: int, cache: FnnCache, d_out: np.ndarray) -> Params:
    grads: Params = {}
    g = d_out
    for layer in reversed(range(n_layers)):
        grads[f"W{layer}"] = cache.activations[layer].T @ g
        grads[f"b{layer}"] = g.sum(axis=0)
        if layer > 0:
            g = (g @ params[f"W{layer}"].T) * (cache.pre_activations[layer - 1] > 0)
    return grads


# GRU


@dataclass
class GruLayerCache:
    inputs: np.ndarray
    hidden: np.ndarray  # (m, L + 1, H), hidden[:, 0] is the initial state
    update: np.ndarray
    reset: np.ndarray
    candidate: np.ndarray


@dataclass
class GruCache:
    layers: list[GruLayerCache]
    last_hidden: np.ndarray
    pre_output: np.ndarray


def gru_layer(
    W: np.ndarray, U: np.ndarray, b: np.ndarray, inputs: np.ndarray
) -> GruLayerCache:
    m, steps, _ = inputs.shape
    width = U.shape[0]
    U_z, U_r, U_n = U[:, :width], U[:, width : 2 * width], U[:, 2 * width :]
    projected = inputs @ W + b
    hidden = np.zeros((m, steps + 1, width))
    update = np.empty((m, steps, width))
    reset = np.empty((m, steps, width))
    candidate = np.empty((m, steps, width))
    for t in range(steps):
        h_prev = hidden[:, t]
        z = sigmoid(projected[:, t, :width] + h_prev @ U_z)
        r = sigmoid(projected[:, t, width : 2 * width] + h_prev @ U_r)
        n = np.tanh(projected[:, t, 2 * width :] + (r * h_prev) @ U_n)
        hidden[:, t + 1] = (1.0 - z) * n + z * h_prev
        update[:, t], reset[:, t], candidate[:, t] = z, r, n
    return GruLayerCache(inputs, hidden, update, reset, candidate)


def gru_pass(
    params: Params, hidden_dims: tuple[int, ...], X: np.ndarray
) -> tuple[np.ndarray, GruCache]:
    """Stacked GRU over the window, last hidden state through a rectified projection."""
    layers = []
    inputs = X
    for layer in range(len(hidden_dims)):
        cache = gru_layer(
            params[f"gru{layer}.W"], params[f"gru{layer}.U"], params[f"gru{layer}.b"], inputs
        )
        layers.append(cache)
        inputs = cache.hidden[:, 1:]
    last = inputs[:, -1]
    pre_output = last @ params["out.W"] + params["out.b"]
    return relu(pre_output), GruCache(layers, last, pre_output)


def _gru_layer_backward(
    W: np.ndarray, U: np.ndarray, cache: GruLayerCache, d_hidden_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    width = U.shape[0]
    U_z, U_r, U_n = U[:, :width], U[:, width : 2 * width], U[:, 2 * width :]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(3 * width)
    d_inputs = np.zeros_like(cache.inputs)
    dh = np.zeros((cache.inputs.shape[0], width))
    for t in reversed(range(cache.inputs.shape[1])):
        dh = dh + d_hidden_out[:, t]
        h_prev = cache.hidden[:, t]
        z, r, n = cache.update[:, t], cache.reset[:, t], cache.candidate[:, t]

        d_prev = dh * z
        da_n = dh * (1.0 - z) * (1.0 - n**2)
        da_z = dh * (h_prev - n) * z * (1.0 - z)
        d_reset_hidden = da_n @ U_n.T
        d_prev += d_reset_hidden * r
        da_r = d_reset_hidden * h_prev * r * (1.0 - r)

        da = np.concatenate([da_z, da_r, da_n], axis=1)
        dW += cache.inputs[:, t].T @ da
        db += da.sum(axis=0)
        dU[:, :width] += h_prev.T @ da_z
        dU[:, width : 2 * width] += h_prev.T @ da_r
        dU[:, 2 * width :] += (r * h_prev).T @ da_n
        d_inputs[:, t] = da @ W.T
        dh = d_prev + da_z @ U_z.T + da_r @ U_r.T
    return dW, dU, db, d_inputs


def gru_gradients(
    params: Params, hidden_dims: tuple[int, ...], cache: GruCache, d_out: np.ndarray
) -> Params:
    """Backpropagation through time across the lookback window."""
    grads: Params = {}
    d_pre = d_out * (cache.pre_output > 0)
    grads["out.W"] = cache.last_hidden.T @ d_pre
    grads["out.b"] = d_pre.sum(axis=0)
    top = cache.layers[-1]
    d_hidden = np.zeros_like(top.hidden[:, 1:])
    d_hidden[:, -1] = d_pre @ params["out.W"].T
    for layer in reversed(range(len(hidden_dims))):
        dW, dU, db, d_hidden = _gru_layer_backward(
            params[f"gru{layer}.W"], params[f"gru{layer}.U"], cache.layers[layer], d_hidden
        )
        grads[f"gru{layer}.W"], grads[f"gru{layer}.U"], grads[f"gru{layer}.b"] = dW, dU, db
    return grads


# shared


def weighted_mse(
    pred: np.ndarray, target: np.ndarray, weights: np.ndarray | None = None
) -> tuple[float, np.ndarray]:
    """Sample-weighted mean squared error and its gradient w.r.t. ``pred``."""
    if pred.shape != target.shape:
        raise ShapeError(f"Prediction {pred.shape} and target {target.shape} differ")
    w = np.ones(pred.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    norm = w.sum() * pred.shape[1]
    residual = pred - target
    loss = float(np.sum(w[:, np.newaxis] * residual**2) / norm)
    return loss, 2.0 * w[:, np.newaxis] * residual / norm


def loss_and_gradients(
    model: FnnModel | GruModel,
    X: np.ndarray,
    Y: np.ndarray,
    weights: np.ndarray | None = None,
    params: Params | None = None,
) -> tuple[float, Params]:
    """MSE loss of a normalized batch and exact gradients for every parameter."""
    params = dict(model.params) if params is None else params
    if isinstance(model, FnnModel):
        pred, fnn_cache = fnn_pass(params, model.n_layers, X)
        loss, d_out = weighted_mse(pred, Y, weights)
        return loss, fnn_gradients(params, model.n_layers, fnn_cache, d_out)
    pred, gru_cache = gru_pass(params, model.hidden_dims, X)
    loss, d_out = weighted_mse(pred, Y, weights)
    return loss, gru_gradients(params, model.hidden_dims, gru_cache, d_out)


def check_finite_input(values: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"Non-finite {what}")


def init_fnn(
    layer_dims: tuple[int, ...],
    stream: RngStream,
    input_norm: Normalizer,
    output_norm: Normalizer,
    one_step: bool = False,
    output_bias: np.ndarray | None = None,
    cfg: TrainConfig | None = None,
) -> FnnModel:
    """Uniform ``+-1/sqrt(fan_in)`` weights and biases drawn from ``stream``.

    With ``output_bias`` the output layer starts as that constant map.
    """
    rng = stream.generator()
    params: Params = {}
    for name, shape in FnnModel.param_shapes(layer_dims).items():
        fan_in = shape[0] if len(shape) == 2 else layer_dims[int(name[1:])]
        bound = 1.0 / np.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    if output_bias is not None:
        last = len(layer_dims) - 2
        params[f"W{last}"] = np.zeros_like(params[f"W{last}"])
        params[f"b{last}"] = np.asarray(output_bias, dtype=float).copy()
    return FnnModel(
        layer_dims=layer_dims,
        params=params,
        input_norm=input_norm,
        output_norm=output_norm,
        one_step=one_step,
        train_config=cfg,
        seed=stream.seed,
        stream_label=stream.stream_label,
    )


def init_gru(
    input_dim: int,
    hidden_dims: tuple[int, ...],
    output_dim: int,
    lookback: int,
    stream: RngStream,
    input_norm: Normalizer,
    output_norm: Normalizer,
    output_bias: np.ndarray | None = None,
    cfg: TrainConfig | None = None,
) -> GruModel:
    """Uniform ``+-1/sqrt(width)`` parameters; ``output_bias`` presets a constant output layer."""
    rng = stream.generator()
    params: Params = {}
    for name, shape in GruModel.param_shapes(input_dim, hidden_dims, output_dim).items():
        if name.startswith("gru"):
            width = hidden_dims[int(name[3 : name.index(".")])]
        else:
            width = hidden_dims[-1]
        bound = 1.0 / np.sqrt(width)
        params[name] = rng.uniform(-bound, bound, size=shape)
    if output_bias is not None:
        params["out.W"] = np.zeros_like(params["out.W"])
        params["out.b"] = np.asarray(output_bias, dtype=float).copy()
    return GruModel(
        input_dim=input_dim,
        hidden_dims=hidden_dims,
        output_dim=output_dim,
        lookback=lookback,
        params=params,
        input_norm=input_norm,
        output_norm=output_norm,
        train_config=cfg,
        seed=stream.seed,
        stream_label=stream.stream_label,
    )


def fnn_forward(model: FnnModel, inputs: np.ndarray, normalized: bool = False) -> np.ndarray:
    """Evaluate the FNN on one input vector or a ``(m, d)`` batch.

    Raw inputs are normalized with the embedded statistics; the output is always
    returned in physical units.
    """
    X = np.asarray(inputs, dtype=float)
    check_finite_input(X, "FNN input")
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.layer_dims[0]:
        raise ShapeError(f"FNN expects {model.layer_dims[0]} inputs, got {X.shape[1]}")
    if not normalized:
        X = model.input_norm.normalize(X)
    out, _ = fnn_pass(dict(model.params), model.n_layers, X)
    out = model.output_norm.denormalize(out)
    return out[0] if single else out


def gru_forward(model: GruModel, window: np.ndarray, normalized: bool = False) -> np.ndarray:
    """Evaluate the GRU on one ``(lookback, d)`` window or a ``(m, lookback, d)`` batch."""
    X = np.asarray(window, dtype=float)
    check_finite_input(X, "GRU window")
    single = X.ndim == 2
    if single:
        X = X[np.newaxis]
    if X.ndim != 3 or X.shape[1] != model.lookback or X.shape[2] != model.input_dim:
        raise ShapeError(
            f"GRU expects windows of shape ({model.lookback}, {model.input_dim}), "
            f"got {tuple(X.shape[-2:])}"
        )
    if not normalized:
        X = model.input_norm.normalize(X)
    out, _ = gru_pass(dict(model.params), model.hidden_dims, X)
    out = model.output_norm.denormalize(out)
    return out[0] if single else out
