"""Monte-Carlo predictive bands and their coverage."""

import time
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from thermocline_twin.exceptions import (
    DivergenceError,
    InstabilityError,
    IntegrationError,
    ParameterError,
    ShapeError,
)
from thermocline_twin.models.data import ControlVector, RngStream, TimeGrid
from thermocline_twin.models.mvg import MvgModel, PredictiveBand
from thermocline_twin.models.sindyc import LinearModel, RolloutConfig
from thermocline_twin.services.sindyc.rollout import rollout
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

MIN_SAMPLES = 100
DEFAULT_SAMPLES = 1000
BAND_QUANTILES = (0.025, 0.975)


def predictive_band(
    mvg: MvgModel,
    x0: np.ndarray | Sequence[float],
    controls: Sequence[ControlVector] | np.ndarray,
    grid: TimeGrid,
    n_samples: int = DEFAULT_SAMPLES,
    stream: RngStream | None = None,
    rcfg: RolloutConfig | None = None,
) -> PredictiveBand:
    """Sample coefficient vectors, roll each out and summarize per grid point.

    Divergent samples are dropped and counted. The mean is the sample mean of
    the surviving rollouts; the band is their 2.5% / 97.5% quantiles, widened
    where needed so it always contains the mean.

    Raises:
        InstabilityError: when more than half of the samples diverge.
    """
    if n_samples < MIN_SAMPLES:
        raise ParameterError(
            f"n_samples must be at least {MIN_SAMPLES}, got {n_samples}", n_samples=n_samples
        )
    stream = stream or RngStream(seed=0, stream_label="band")
    start = time.perf_counter()
    draws = mvg.sample(n_samples, stream.generator())
    rollouts = []
    discarded = 0
    for index, vector in enumerate(draws):
        model = LinearModel.unflatten(vector, mvg.state_dim, mvg.input_dim, mvg.target)
        try:
            rollouts.append(rollout(model, x0, controls, grid, rcfg))
        except (DivergenceError, IntegrationError) as e:
            discarded += 1
            logger.debug(f"Discarded band sample {index}: {e.message}")
    if discarded * 2 > n_samples:
        raise InstabilityError(
            f"{discarded} of {n_samples} sampled models diverged",
            discarded=discarded,
            n_samples=n_samples,
        )
    if discarded:
        logger.warning(f"Discarded {discarded} of {n_samples} divergent band samples")

    stacked = np.stack(rollouts)
    mean = stacked.mean(axis=0)
    lower, upper = np.quantile(stacked, BAND_QUANTILES, axis=0)
    band = PredictiveBand(
        times=grid.times,
        mean=mean,
        lower=np.minimum(lower, mean),
        upper=np.maximum(upper, mean),
        n_samples=len(rollouts),
        n_discarded=discarded,
    )
    logger.info(
        f"Predictive band from {len(rollouts)} samples built in "
        f"{time.perf_counter() - start:.2f} seconds"
    )
    return band


def coverage(band: PredictiveBand, reference: np.ndarray) -> np.ndarray:
    """Per-channel fraction of grid points where ``reference`` lies inside the band."""
    reference = np.asarray(reference, dtype=float)
    if reference.ndim == 1:
        reference = reference[:, np.newaxis]
    if reference.shape != band.mean.shape:
        raise ShapeError(
            f"Reference shape {reference.shape} does not match band {band.mean.shape}"
        )
    inside = (reference >= band.lower) & (reference <= band.upper)
    return np.asarray(inside.mean(axis=0))


def write_band_csv(band: PredictiveBand, path: Path, suffixes: tuple[str, ...] = ("m", "q")) -> Path:
    """Write ``t, mean_<s>, lo_<s>, hi_<s>`` columns for each state channel."""
    if len(suffixes) != band.mean.shape[1]:
        raise ShapeError(f"Need {band.mean.shape[1]} channel suffixes, got {len(suffixes)}")
    columns: dict[str, np.ndarray] = {"t": band.times}
    for index, suffix in enumerate(suffixes):
        columns[f"mean_{suffix}"] = band.mean[:, index]
        columns[f"lo_{suffix}"] = band.lower[:, index]
        columns[f"hi_{suffix}"] = band.upper[:, index]
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    return path
