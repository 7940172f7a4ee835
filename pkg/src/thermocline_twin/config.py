"""Process-wide settings read from the environment."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class ToolkitSettings(BaseSettings):
    """Runtime knobs shared by the CLI and the services.

    Values come from ``THERMOTWIN_*`` environment variables or a local ``.env``.
    """

    model_config = SettingsConfigDict(
        env_prefix="THERMOTWIN_",
        env_file=".env",
        extra="ignore",
    )

    log_level: str = Field(default="INFO", description="Root log level")
    workers: int = Field(
        default=1, ge=1, description="Processes used for independent simulations and fits"
    )
    output_dir: Path = Field(default=Path("runs"), description="Default artifact directory")
    default_seed: int = Field(default=20240601, ge=0, lt=2**64)
    blowup_bound: float = Field(
        default=1e8, gt=0, description="Magnitude treated as rollout divergence"
    )


def get_settings() -> ToolkitSettings:
    """Build settings from the current environment."""
    return ToolkitSettings()
