"""End-to-end runs of the whole pipeline on the tiny config."""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from thermocline_twin.cli import cli
from thermocline_twin.services.harness import RUN_MANIFEST, ExperimentHarness, evaluate_run, write_report
from thermocline_twin.services.harness.runner import sha256_of
from tests.conftest import tiny_config


@pytest.fixture(scope="module")
def first_run(tmp_path_factory):
    """One tiny run shared by the pipeline tests."""
    root = tmp_path_factory.mktemp("pipeline")
    manifest = ExperimentHarness(tiny_config(), root / "first").run()
    return root, manifest


@pytest.mark.slow
@pytest.mark.integration
class TestPipeline:
    """Test complete comparison runs."""

    @pytest.fixture(autouse=True)
    def _unpack(self, first_run):
        self.root, self.manifest = first_run
        self.config = tiny_config()
        self.run_root = self.root / "first" / "tiny-11"

    def test_artifacts_recorded(self):
        """Every artifact exists and matches its recorded hash."""
        expected = {"data", "experiment", "ensemble", "mvg", "sindyc", "fnn", "fnn_exp", "gru", "runtime"}
        assert expected <= set(self.manifest.artifacts)
        for family in ("mvg", "sindyc", "fnn", "gru"):
            for arm in ("al", "random"):
                assert f"history_{family}_{arm}" in self.manifest.artifacts
        for name, digest in self.manifest.hashes.items():
            assert sha256_of(self.manifest.path_of(name, self.run_root)) == digest
        assert self.manifest.run_id == "tiny-11"

    def test_report_contents(self):
        """The report scores every point model and bands the Gaussian."""
        rmse = pd.read_csv(self.run_root / "report" / "rmse.csv")
        assert set(rmse["family"]) == {"sindyc", "fnn", "fnn_exp", "gru"}
        assert set(rmse["dataset"]) == {"sim:10", "sim:11", "experiment"}
        coverage = pd.read_csv(self.run_root / "report" / "coverage.csv")
        assert set(coverage["family"]) <= {"mvg"}
        curves = pd.read_csv(self.run_root / "report" / "curves.csv")
        assert set(curves["arm"]) == {"al", "random"}
        assert (self.run_root / "report" / "report.md").read_text().startswith("# Run report `tiny-11`")

    def test_band_files_listed(self):
        """Every banded dataset has a band CSV in the report, listed and hashed in the manifest."""
        coverage = pd.read_csv(self.run_root / "report" / "coverage.csv")
        for dataset in coverage["dataset"]:
            name = "band_" + dataset.replace(":", "_")
            path = self.manifest.path_of(name, self.run_root)
            assert path.parent.name == "report"
            assert sha256_of(path) == self.manifest.hashes[name]
            frame = pd.read_csv(path)
            assert list(frame.columns) == ["t", "mean_m", "lo_m", "hi_m", "mean_q", "lo_q", "hi_q"]
            assert len(frame) == self.config.grid.n_steps
        stored = json.loads((self.run_root / RUN_MANIFEST).read_text())
        assert stored["artifacts"] == self.manifest.artifacts

    def test_closest_match_reported(self):
        """The pool trajectory nearest the experiment's controls is reported."""
        closest = pd.read_csv(self.run_root / "report" / "closest.csv")
        assert len(closest) == 1
        assert int(closest["trajectory_id"].iloc[0]) in range(self.config.pool_size)
        assert closest["control_distance"].iloc[0] >= 0.0
        assert "## Closest simulated trajectory" in (self.run_root / "report" / "report.md").read_text()

    def test_rerun_is_identical(self):
        """A second run with the same seed reproduces every artifact and the report."""
        again = ExperimentHarness(self.config, self.root / "second").run()
        assert again.hashes == self.manifest.hashes
        second_root = self.root / "second" / "tiny-11"
        for name in ("rmse.csv", "coverage.csv", "curves.csv", "runtime.csv", "report.md"):
            first = (self.run_root / "report" / name).read_bytes()
            assert (second_root / "report" / name).read_bytes() == first

    def test_report_regeneration(self):
        """Rebuilding the report from stored artifacts gives byte-identical files."""
        written = write_report(evaluate_run(self.run_root), self.root / "rebuilt")
        for name, path in written.items():
            original = self.run_root / "report" / path.name
            assert path.read_bytes() == original.read_bytes(), name

    def test_report_command(self):
        """The report subcommand rebuilds the bundle of a run directory."""
        result = CliRunner().invoke(
            cli, ["report", "--runs", str(self.root / "first"), "--out", str(self.root / "cli")]
        )
        assert result.exit_code == 0, result.output
        assert (self.root / "cli" / "report.md").read_bytes() == (
            self.run_root / "report" / "report.md"
        ).read_bytes()
        manifest = json.loads((self.run_root / RUN_MANIFEST).read_text())
        assert manifest["seeds"]["pool"] == 11
