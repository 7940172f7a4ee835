"""Supplementary studies: GRU lookback length and ensemble subset size."""

import time
from collections.abc import Sequence

import numpy as np
import pandas as pd

from thermocline_twin.models.data import Dataset, RngStream, Trajectory
from thermocline_twin.models.neural import GruModel, TrainConfig
from thermocline_twin.models.sindyc import RolloutConfig, StlsqConfig
from thermocline_twin.services.active_learning import GruSurrogate, MvgSurrogate, evaluate_surrogate
from thermocline_twin.services.mvg import build_ensemble, coverage, fit_mvg, predictive_band
from thermocline_twin.services.neural import train_surrogate
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)


def lookback_study(
    lookbacks: Sequence[int],
    train: Dataset,
    eval_set: Dataset,
    cfg: TrainConfig,
    stream: RngStream | None = None,
) -> pd.DataFrame:
    """Train one GRU per lookback; held-out RMSE plus training and inference time."""
    stream = stream or RngStream(seed=cfg.seed, stream_label="study/lookback")
    rows = []
    for lookback in lookbacks:
        start = time.perf_counter()
        model = train_surrogate(
            "gru", train, cfg.model_copy(update={"lookback": lookback}), stream.child(str(lookback))
        )
        train_s = time.perf_counter() - start
        assert isinstance(model, GruModel)
        start = time.perf_counter()
        (rmse_m, rmse_q), _ = evaluate_surrogate(GruSurrogate(model), eval_set)
        infer_s = time.perf_counter() - start
        rows.append(
            {
                "lookback": lookback,
                "rmse_m": rmse_m,
                "rmse_q": rmse_q,
                "train_s": train_s,
                "infer_s": infer_s,
            }
        )
        logger.info(f"Lookback {lookback}: rmse ({rmse_m:.4g}, {rmse_q:.4g}), trained in {train_s:.2f} seconds")
    return pd.DataFrame(rows)


def subset_size_study(
    sizes: Sequence[int],
    pool: Dataset,
    experiment: Trajectory,
    n_models: int,
    stlsq: StlsqConfig,
    stream: RngStream,
    band_samples: int = 1000,
    rollout: RolloutConfig | None = None,
) -> pd.DataFrame:
    """Ensembles over larger subsets: mean-model error against band coverage."""
    rows = []
    for size in sizes:
        label = f"size{size}"
        ensemble = build_ensemble(pool, n_models, size, stlsq, stream.child(label))
        mvg = fit_mvg(ensemble)
        _, (rmse_m, rmse_q) = evaluate_surrogate(
            MvgSurrogate(mvg, rollout), Dataset.of([experiment]), experiment
        )
        band = predictive_band(
            mvg,
            experiment.ghx[0],
            experiment.controls,
            experiment.grid,
            band_samples,
            stream.child(f"{label}/band"),
            rollout,
        )
        cov_m, cov_q = coverage(band, experiment.ghx)
        rows.append(
            {
                "subset_size": size,
                "n_models": ensemble.n_models,
                "rmse_m": rmse_m,
                "rmse_q": rmse_q,
                "coverage_m": float(cov_m),
                "coverage_q": float(cov_q),
                "mean_width_q": float(np.mean(band.width[:, 1])),
            }
        )
    return pd.DataFrame(rows)
