"""JSON artifacts for ensembles and Gaussian models."""

import json
from pathlib import Path

from pydantic import ValidationError

from thermocline_twin.exceptions import ConfigError, ManifestError
from thermocline_twin.models.mvg import CoefficientEnsemble, MvgArtifact, MvgModel


def _read_json(path: Path) -> object:
    if not path.exists():
        raise ManifestError(f"Artifact not found: {path}", path=str(path))
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Malformed artifact {path}: {e}", path=str(path)) from e


def save_ensemble(ensemble: CoefficientEnsemble, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(ensemble.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_ensemble(path: Path) -> CoefficientEnsemble:
    try:
        return CoefficientEnsemble.model_validate(_read_json(path))
    except ValidationError as e:
        raise ConfigError(f"Malformed ensemble artifact {path}: {e}", path=str(path)) from e


def save_mvg(mvg: MvgModel, ensemble: CoefficientEnsemble, path: Path) -> Path:
    """Write mean, row-major covariance, shrinkage and the ensemble provenance."""
    used = set(mvg.model_ids)
    artifact = MvgArtifact(
        state_dim=mvg.state_dim,
        input_dim=mvg.input_dim,
        target=mvg.target,
        mean=mvg.mean.tolist(),
        covariance=mvg.covariance.tolist(),
        shrinkage=mvg.shrinkage,
        model_ids=list(mvg.model_ids),
        subset_ids=[
            list(ids) for mid, ids in zip(ensemble.model_ids, ensemble.subset_ids) if mid in used
        ],
        seed=ensemble.seed,
        stream_label=ensemble.stream_label,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(artifact.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_mvg(path: Path) -> MvgModel:
    try:
        artifact = MvgArtifact.model_validate(_read_json(path))
    except ValidationError as e:
        raise ConfigError(f"Malformed MvG artifact {path}: {e}", path=str(path)) from e
    return MvgModel(
        mean=artifact.mean,
        covariance=artifact.covariance,
        shrinkage=artifact.shrinkage,
        state_dim=artifact.state_dim,
        input_dim=artifact.input_dim,
        target=artifact.target,
        model_ids=tuple(artifact.model_ids),
    )
