"""Fitting linear SINDyC models to trajectory subsets."""

import json
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from thermocline_twin.exceptions import ConfigError, ManifestError
from thermocline_twin.models.data import CONTROL_CHANNELS, STATE_CHANNELS, Dataset
from thermocline_twin.models.sindyc import LinearModel, SindycArtifact, StlsqConfig, Target
from thermocline_twin.services.data.filters import savgol_filter
from thermocline_twin.services.sindyc.library import build_library, estimate_derivatives, library_names
from thermocline_twin.services.sindyc.stlsq import stlsq_fit
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)


def regression_rows(
    subset: Dataset, cfg: StlsqConfig, target: Target = "ghx"
) -> tuple[np.ndarray, np.ndarray]:
    """Stacked library rows and derivative targets of every trajectory in ``subset``."""
    thetas = []
    derivatives = []
    for traj in subset.trajectories:
        states = traj.states(target)
        if cfg.smoothing_window is not None and cfg.smoothing_window > 1:
            smoothed = np.column_stack(
                [
                    savgol_filter(states[:, col], cfg.smoothing_window, cfg.smoothing_order)
                    for col in range(states.shape[1])
                ]
            )
        else:
            smoothed = states
        thetas.append(build_library(states, traj.controls))
        derivatives.append(estimate_derivatives(smoothed, traj.grid.dt))
    return np.vstack(thetas), np.vstack(derivatives)


def fit_sindyc(
    subset: Dataset, cfg: StlsqConfig | None = None, target: Target = "ghx"
) -> LinearModel:
    """Fit one linear model to all trajectories of ``subset`` stacked together."""
    cfg = cfg or StlsqConfig.for_target(target)
    theta, derivatives = regression_rows(subset, cfg, target)
    model = stlsq_fit(theta, derivatives, cfg, target=target, subset_ids=tuple(subset.ids))
    logger.debug(
        f"Fitted {target} model on trajectories {list(subset.ids)} "
        f"({int(np.count_nonzero(model.flatten()))} nonzero coefficients)"
    )
    return model


def save_linear_model(model: LinearModel, cfg: StlsqConfig, path: Path) -> Path:
    """Write the model artifact JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    artifact = SindycArtifact.from_model(model, cfg)
    state_names = STATE_CHANNELS[model.target]
    if len(state_names) == model.state_dim and len(CONTROL_CHANNELS) == model.input_dim:
        artifact.library_terms = library_names(state_names, CONTROL_CHANNELS)
    path.write_text(artifact.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_linear_model(path: Path) -> LinearModel:
    """Read a model artifact written by :func:`save_linear_model`."""
    if not path.exists():
        raise ManifestError(f"Model artifact not found: {path}", path=str(path))
    try:
        return SindycArtifact.model_validate(json.loads(path.read_text(encoding="utf-8"))).to_model()
    except (ValidationError, json.JSONDecodeError) as e:
        raise ConfigError(f"Malformed model artifact {path}: {e}", path=str(path)) from e
