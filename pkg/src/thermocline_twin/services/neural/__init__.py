"""Numpy FNN and GRU surrogates: passes, training, prediction and artifacts."""

from thermocline_twin.services.neural.artifacts import load_neural, save_neural
from thermocline_twin.services.neural.networks import (
    fnn_forward,
    gru_forward,
    init_fnn,
    init_gru,
    loss_and_gradients,
)
from thermocline_twin.services.neural.optim import AdamOptimizer
from thermocline_twin.services.neural.prediction import (
    one_step_predictions,
    predict_many,
    predict_trajectory,
)
from thermocline_twin.services.neural.training import (
    backward_and_step,
    point_pairs,
    train_surrogate,
    window_pairs,
)

__all__ = [
    "AdamOptimizer",
    "backward_and_step",
    "fnn_forward",
    "gru_forward",
    "init_fnn",
    "init_gru",
    "load_neural",
    "loss_and_gradients",
    "one_step_predictions",
    "point_pairs",
    "predict_many",
    "predict_trajectory",
    "save_neural",
    "train_surrogate",
    "window_pairs",
]
