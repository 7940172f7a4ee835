"""Tests for environment settings."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from thermocline_twin.cli import load_config
from thermocline_twin.config import ToolkitSettings, get_settings


class TestToolkitSettings:
    """Test process-wide settings."""

    @pytest.mark.unit
    def test_defaults(self, monkeypatch, tmp_path):
        """Without environment overrides the defaults apply."""
        monkeypatch.chdir(tmp_path)
        for name in ("LOG_LEVEL", "WORKERS", "OUTPUT_DIR", "DEFAULT_SEED", "BLOWUP_BOUND"):
            monkeypatch.delenv(f"THERMOTWIN_{name}", raising=False)
        settings = get_settings()
        assert settings.log_level == "INFO"
        assert settings.workers == 1
        assert settings.output_dir == Path("runs")
        assert settings.blowup_bound == 1e8

    @pytest.mark.unit
    def test_environment_overrides(self, monkeypatch, tmp_path):
        """Prefixed environment variables override the defaults."""
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("THERMOTWIN_WORKERS", "4")
        monkeypatch.setenv("THERMOTWIN_OUTPUT_DIR", "elsewhere")
        settings = get_settings()
        assert settings.workers == 4
        assert settings.output_dir == Path("elsewhere")

    @pytest.mark.unit
    def test_dotenv_file(self, monkeypatch, tmp_path):
        """A local .env file is read."""
        monkeypatch.chdir(tmp_path)
        monkeypatch.delenv("THERMOTWIN_LOG_LEVEL", raising=False)
        (tmp_path / ".env").write_text("THERMOTWIN_LOG_LEVEL=DEBUG\n")
        assert ToolkitSettings().log_level == "DEBUG"

    @pytest.mark.unit
    def test_invalid_worker_count(self, monkeypatch, tmp_path):
        """A worker count below one is rejected."""
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("THERMOTWIN_WORKERS", "0")
        with pytest.raises(ValidationError):
            get_settings()


class TestConfigLoading:
    """Test how the command line combines settings and config files."""

    @pytest.mark.unit
    def test_preset_uses_environment(self, monkeypatch, tmp_path):
        """Without a config file the desk preset takes the seed and bound from settings."""
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("THERMOTWIN_DEFAULT_SEED", "7")
        monkeypatch.setenv("THERMOTWIN_BLOWUP_BOUND", "1e5")
        config = load_config(None, workers=3)
        assert config.seed == 7
        assert config.rollout.blowup_bound == 1e5
        assert config.workers == 3

    @pytest.mark.unit
    def test_file_wins(self, monkeypatch, tmp_path):
        """A config file ignores the environment seed."""
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("THERMOTWIN_DEFAULT_SEED", "7")
        path = tmp_path / "run.json"
        path.write_text('{"seed": 99}')
        assert load_config(path).seed == 99
