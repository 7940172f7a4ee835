"""End-to-end runs: data, models, comparisons, the run manifest and its report."""

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from thermocline_twin.exceptions import ConfigError, ManifestError
from thermocline_twin.models.data import Dataset, Provenance, RngStream
from thermocline_twin.models.harness import (
    ExperimentConfig,
    PseudoExperiment,
    PseudoExperimentRecord,
    Report,
    RunManifest,
)
from thermocline_twin.models.mvg import CoefficientEnsemble, MvgModel
from thermocline_twin.models.neural import FnnModel, GruModel
from thermocline_twin.models.sindyc import LinearModel
from thermocline_twin.services.active_learning import (
    AlInputs,
    BranchTrainer,
    FnnSurrogate,
    GruSurrogate,
    LinearSurrogate,
    Surrogate,
    run_comparison,
    write_comparison,
)
from thermocline_twin.services.data import (
    load_dataset,
    read_trajectory_csv,
    save_dataset,
    write_trajectory_csv,
)
from thermocline_twin.services.harness.evaluation import evaluate_all, write_report
from thermocline_twin.services.harness.pools import build_pool, experiment_schedule
from thermocline_twin.services.harness.pseudo import make_pseudo_experiment
from thermocline_twin.services.mvg import build_ensemble, fit_mvg, load_mvg, save_ensemble, save_mvg
from thermocline_twin.services.neural import load_neural, save_neural, train_surrogate
from thermocline_twin.services.sindyc import fit_sindyc, load_linear_model, save_linear_model
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

RUN_MANIFEST = "run_manifest.json"
EXPERIMENT_RECORD = "experiment.json"
POINT_MODELS = ("sindyc", "fnn", "fnn_exp", "gru")

TrainedModel = LinearModel | MvgModel | FnnModel | GruModel


@dataclass(frozen=True)
class RunData:
    pool: Dataset
    eval_set: Dataset
    experiment: PseudoExperiment


def run_id_for(config: ExperimentConfig) -> str:
    return f"{config.name}-{config.seed}"


def stream_seeds(config: ExperimentConfig) -> dict[str, int]:
    """Every stream label a run draws from, with the root seed it hangs off."""
    labels = ["pool", "experiment/schedule", "experiment/noise", "report/band"]
    if "mvg" in config.families:
        labels.append("ensemble")
    labels += [f"train/{name}" for name in ("fnn", "fnn_exp", "gru")]
    labels += [f"al/{family}" for family in config.families]
    return {label: config.seed for label in sorted(labels)}


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def prepare_data(config: ExperimentConfig) -> RunData:
    """Simulated pool, held-out set and the pseudo-experiment of one run."""
    pool, eval_set = build_pool(config)
    experiment = make_pseudo_experiment(
        config.bed,
        config.ghx,
        config.perturbation,
        config.noise,
        experiment_schedule(config),
        config.grid,
        RngStream(seed=config.seed, stream_label="experiment/noise"),
        initial_bed=config.initial_bed,
        smoothing_window=config.smoothing_window,
        smoothing_order=config.smoothing_order,
        tol=config.tolerance,
    )
    return RunData(pool=pool, eval_set=eval_set, experiment=experiment)


def save_data(data: RunData, data_dir: Path, seed: int | None = None) -> dict[str, Path]:
    """Dataset manifest (evaluation ids held out) plus the pseudo-experiment files."""
    everything = Dataset.of(data.pool.trajectories + data.eval_set.trajectories)
    manifest = save_dataset(everything, data_dir, seed, list(data.eval_set.ids))
    exp = data.experiment
    write_trajectory_csv(exp.raw, data_dir / "experiment_raw.csv")
    write_trajectory_csv(exp.denoised, data_dir / "experiment_denoised.csv")
    record = PseudoExperimentRecord(
        id=exp.raw.id,
        raw="experiment_raw.csv",
        denoised="experiment_denoised.csv",
        perturbation=exp.perturbation,
        noise=exp.noise,
        smoothing_window=exp.smoothing_window,
        smoothing_order=exp.smoothing_order,
    )
    record_path = data_dir / EXPERIMENT_RECORD
    record_path.write_text(record.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return {"data": manifest, "experiment": record_path}


def load_data(data_dir: Path) -> RunData:
    """Inverse of :func:`save_data`."""
    dataset, manifest = load_dataset(data_dir / "manifest.json")
    record_path = data_dir / EXPERIMENT_RECORD
    if not record_path.exists():
        raise ManifestError(f"Pseudo-experiment record not found: {record_path}", path=str(record_path))
    try:
        record = PseudoExperimentRecord.model_validate_json(record_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigError(f"Malformed pseudo-experiment record {record_path}: {e}") from e
    raw, denoised = (
        read_trajectory_csv(data_dir / name, record.id, Provenance.PSEUDO_EXPERIMENTAL).replace(
            grid=manifest.grid
        )
        for name in (record.raw, record.denoised)
    )
    experiment = PseudoExperiment(
        raw=raw,
        denoised=denoised,
        perturbation=record.perturbation,
        noise=record.noise,
        smoothing_window=record.smoothing_window,
        smoothing_order=record.smoothing_order,
    )
    held_out = set(manifest.held_out_ids)
    return RunData(
        pool=dataset.without(list(held_out)),
        eval_set=dataset.subset([i for i in dataset.ids if i in held_out]),
        experiment=experiment,
    )


def build_run_ensemble(config: ExperimentConfig, pool: Dataset) -> CoefficientEnsemble:
    return build_ensemble(
        pool,
        config.ensemble_size,
        config.subset_size,
        config.stlsq,
        RngStream(seed=config.seed, stream_label="ensemble"),
        workers=config.workers,
    )


def reference_vector(config: ExperimentConfig, experiment: PseudoExperiment) -> np.ndarray:
    """Coefficients of a linear model fitted to the denoised pseudo-experiment."""
    return fit_sindyc(Dataset.of([experiment.denoised]), config.stlsq).flatten()


def train_run_models(
    config: ExperimentConfig, data: RunData, ensemble: CoefficientEnsemble | None
) -> dict[str, TrainedModel]:
    """Final models of every configured family, trained on the whole pool."""
    models: dict[str, TrainedModel] = {}
    if "sindyc" in config.families:
        models["sindyc"] = fit_sindyc(data.pool, config.stlsq)
    if "mvg" in config.families and ensemble is not None:
        models["mvg"] = fit_mvg(ensemble)
    if "fnn" in config.families:
        models["fnn"] = train_surrogate(
            "fnn", data.pool, config.fnn, RngStream(seed=config.seed, stream_label="train/fnn")
        )
        if config.include_experiment_fnn:
            models["fnn_exp"] = train_surrogate(
                "fnn",
                data.pool,
                config.fnn,
                RngStream(seed=config.seed, stream_label="train/fnn_exp"),
                extra=Dataset.of([data.experiment.denoised]),
            )
    if "gru" in config.families:
        models["gru"] = train_surrogate(
            "gru", data.pool, config.gru, RngStream(seed=config.seed, stream_label="train/gru")
        )
    return models


def save_models(
    models: dict[str, TrainedModel],
    config: ExperimentConfig,
    ensemble: CoefficientEnsemble | None,
    models_dir: Path,
) -> dict[str, Path]:
    written: dict[str, Path] = {}
    if ensemble is not None:
        written["ensemble"] = save_ensemble(ensemble, models_dir / "ensemble.json")
    for name, model in models.items():
        path = models_dir / f"{name}.json"
        if isinstance(model, LinearModel):
            written[name] = save_linear_model(model, config.stlsq, path)
        elif isinstance(model, MvgModel):
            assert ensemble is not None
            written[name] = save_mvg(model, ensemble, path)
        else:
            written[name] = save_neural(model, path)
    return written


def read_run_manifest(root: Path) -> RunManifest:
    path = root / RUN_MANIFEST
    if not path.exists():
        raise ManifestError(f"Run manifest not found: {path}", path=str(path))
    try:
        return RunManifest.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"Malformed run manifest {path}: {e}", path=str(path)) from e


def _surrogate(name: str, path: Path, config: ExperimentConfig) -> Surrogate:
    if name == "sindyc":
        return LinearSurrogate(load_linear_model(path), config.rollout)
    model = load_neural(path)
    if isinstance(model, GruModel):
        return GruSurrogate(model)
    return FnnSurrogate(model)


def evaluate_run(root: Path) -> Report:
    """Rebuild a run's report from its stored artifacts alone."""
    manifest = read_run_manifest(root)
    try:
        config = ExperimentConfig.model_validate(manifest.config)
    except ValidationError as e:
        raise ConfigError(f"Run {manifest.run_id} carries an invalid config: {e}") from e
    data = load_data(manifest.path_of("data", root).parent)

    surrogates = {
        name: (manifest.run_id, _surrogate(name, manifest.path_of(name, root), config))
        for name in POINT_MODELS
        if name in manifest.artifacts
    }
    mvg = None
    if "mvg" in manifest.artifacts:
        mvg = (manifest.run_id, load_mvg(manifest.path_of("mvg", root)))
    histories: dict[tuple[str, str], pd.DataFrame] = {}
    for family in config.families:
        for arm in ("al", "random"):
            name = f"history_{family}_{arm}"
            if name in manifest.artifacts:
                histories[(family, arm)] = pd.read_csv(
                    manifest.path_of(name, root), float_precision="round_trip"
                )

    return evaluate_all(
        surrogates,
        data.eval_set,
        data.experiment.denoised,
        mvg=mvg,
        band_samples=config.band_samples,
        band_stream=RngStream(seed=config.seed, stream_label="report/band"),
        rollout=config.rollout,
        histories=histories,
        pool=data.pool,
        run_id=manifest.run_id,
        config=manifest.config,
        seeds=manifest.seeds,
    )


def find_runs(runs_dir: Path) -> list[Path]:
    """Run directories under ``runs_dir`` (or ``runs_dir`` itself), sorted."""
    if (runs_dir / RUN_MANIFEST).exists():
        return [runs_dir]
    roots = sorted(path.parent for path in runs_dir.glob(f"*/{RUN_MANIFEST}"))
    if not roots:
        raise ManifestError(f"No run manifests under {runs_dir}", path=str(runs_dir))
    return roots


def merge_reports(reports: list[Report]) -> Report:
    """One report holding every row of ``reports``; seeds are keyed by run id."""
    if len(reports) == 1:
        return reports[0]
    return Report(
        run_id="+".join(r.run_id for r in reports),
        rmse=tuple(row for r in reports for row in r.rmse),
        coverage=tuple(row for r in reports for row in r.coverage),
        curves=tuple(row for r in reports for row in r.curves),
        runtime=tuple(row for r in reports for row in r.runtime),
        closest=tuple(row for r in reports for row in r.closest),
        bands=tuple(record for r in reports for record in r.bands),
        config={r.run_id: r.config for r in reports},
        seeds={f"{r.run_id}:{label}": seed for r in reports for label, seed in r.seeds.items()},
    )


class ExperimentHarness:
    """Runs the whole pipeline of one config into ``out_dir/<run id>``."""

    def __init__(self, config: ExperimentConfig, out_dir: Path) -> None:
        self.config = config
        self.run_id = run_id_for(config)
        self.root = out_dir / self.run_id
        self.logger = logging_service.get_logger(__name__)

    def _relative(self, paths: dict[str, Path]) -> dict[str, str]:
        return {name: path.relative_to(self.root).as_posix() for name, path in paths.items()}

    def _write_manifest(self, manifest: RunManifest) -> None:
        (self.root / RUN_MANIFEST).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")

    def run(self) -> RunManifest:
        """Data, ensemble, final models, paired comparisons, manifest, then the report."""
        start = time.perf_counter()
        config = self.config
        self.logger.info(f"Starting run {self.run_id} into {self.root}")
        self.root.mkdir(parents=True, exist_ok=True)

        data = prepare_data(config)
        artifacts = save_data(data, self.root / "data", config.seed)
        ensemble = build_run_ensemble(config, data.pool) if "mvg" in config.families else None
        reference = reference_vector(config, data.experiment) if ensemble is not None else None

        models = train_run_models(config, data, ensemble)
        artifacts.update(save_models(models, config, ensemble, self.root / "models"))

        inputs = AlInputs(
            pool=data.pool,
            eval_set=data.eval_set,
            experiment=data.experiment.denoised,
            ensemble=ensemble,
            reference=reference,
        )
        trainer = BranchTrainer(config.stlsq, config.rollout, config.fnn, config.gru)
        results = run_comparison(config, inputs, trainer=trainer)
        artifacts.update(write_comparison(results, self.root / "histories"))

        manifest = RunManifest(
            run_id=self.run_id,
            config=config.model_dump(mode="json"),
            seeds=stream_seeds(config),
            artifacts=self._relative(artifacts),
            hashes={name: sha256_of(path) for name, path in sorted(artifacts.items())},
        )
        self._write_manifest(manifest)

        written = write_report(evaluate_run(self.root), self.root / "report")
        bands = {name: path for name, path in written.items() if name.startswith("band_")}
        if bands:
            manifest = manifest.model_copy(
                update={
                    "artifacts": {**manifest.artifacts, **self._relative(bands)},
                    "hashes": {
                        **manifest.hashes,
                        **{name: sha256_of(path) for name, path in sorted(bands.items())},
                    },
                }
            )
            self._write_manifest(manifest)
        self.logger.info(f"Run {self.run_id} completed in {time.perf_counter() - start:.2f} seconds")
        return manifest
