"""JSON weight dumps for trained networks."""

import json
from pathlib import Path

from pydantic import ValidationError

from thermocline_twin.exceptions import ConfigError, ManifestError
from thermocline_twin.models.neural import FnnModel, GruModel, NeuralArtifact


def save_neural(model: FnnModel | GruModel, path: Path) -> Path:
    """Architecture header, parameters, normalization stats, config and seed."""
    path.parent.mkdir(parents=True, exist_ok=True)
    artifact = NeuralArtifact(model=model)
    path.write_text(artifact.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def load_neural(path: Path) -> FnnModel | GruModel:
    if not path.exists():
        raise ManifestError(f"Artifact not found: {path}", path=str(path))
    try:
        artifact = NeuralArtifact.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Malformed network artifact {path}: {e}", path=str(path)) from e
    return artifact.model
