#!/usr/bin/env python3
"""Command-line entry point for thermocline-twin."""

import functools
import json
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import click
from pydantic import ValidationError

from thermocline_twin.config import get_settings
from thermocline_twin.exceptions import ConfigError, ManifestError, ParameterError, ThermoTwinError
from thermocline_twin.models.active_learning import BRANCHES, RandomStrategy
from thermocline_twin.models.data import Dataset, RngStream
from thermocline_twin.models.harness import ExperimentConfig
from thermocline_twin.models.mvg import CoefficientEnsemble
from thermocline_twin.models.sindyc import RolloutConfig, StlsqConfig
from thermocline_twin.services.active_learning import (
    ActiveLearningRunner,
    AlInputs,
    BranchTrainer,
    write_history_csv,
)
from thermocline_twin.services.data import load_dataset
from thermocline_twin.services.harness import (
    RUN_MANIFEST,
    ExperimentHarness,
    build_run_ensemble,
    evaluate_run,
    find_runs,
    load_data,
    lookback_study,
    merge_reports,
    prepare_data,
    reference_vector,
    save_data,
    subset_size_study,
    write_report,
)
from thermocline_twin.services.mvg import fit_mvg, load_ensemble, save_ensemble, save_mvg
from thermocline_twin.services.neural import save_neural, train_surrogate
from thermocline_twin.services.sindyc import fit_sindyc, save_linear_model
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])

CONFIG_OPTION = click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Experiment config JSON (desk preset when omitted)",
)
DATA_OPTION = click.option(
    "--data",
    "data_dir",
    type=click.Path(path_type=Path),
    required=True,
    help="Directory written by `generate`",
)


def _fail(error: ThermoTwinError) -> None:
    logger.error(f"{type(error).__name__}: {error.message}")
    click.echo(json.dumps(error.to_dict(), default=str), err=True)
    sys.exit(error.exit_code)


def handle_errors(func: F) -> F:
    """Map toolkit errors onto exit codes and a JSON error document on stderr."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except ThermoTwinError as e:
            _fail(e)
        except ValidationError as e:
            _fail(ConfigError(f"Invalid configuration: {e}"))
        except FileNotFoundError as e:
            _fail(ManifestError(f"File not found: {e.filename}", path=str(e.filename)))
        except Exception as e:
            logger.exception("Unexpected failure")
            _fail(ThermoTwinError(f"Unexpected failure: {e}"))

    return wrapper  # type: ignore[return-value]


def load_config(config_path: Path | None, workers: int | None = None) -> ExperimentConfig:
    """Parse the config file, or build the desk preset from the environment settings.

    A worker count overrides either.
    """
    if config_path:
        config = ExperimentConfig.from_file(config_path)
    else:
        settings = get_settings()
        config = ExperimentConfig.desk(
            seed=settings.default_seed,
            rollout=RolloutConfig(method="exact", blowup_bound=settings.blowup_bound),
        )
    if workers is not None:
        config = ExperimentConfig.model_validate({**config.model_dump(), "workers": workers})
    return config


def _workers(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    workers = get_settings().workers
    return workers if workers > 1 else None


def _emit(written: dict[str, Path]) -> None:
    click.echo(json.dumps({name: str(path) for name, path in written.items()}, indent=2))


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default=None,
    help="Logging level (THERMOTWIN_LOG_LEVEL when omitted)",
)
@click.version_option(package_name="thermocline-twin")
def cli(log_level: str | None) -> None:
    """Thermocline storage digital-twin surrogates and active learning."""
    logging_service.configure_logging(log_level or get_settings().log_level)


@cli.command()
@CONFIG_OPTION
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--workers", type=int, default=None, help="Simulation processes")
@handle_errors
def generate(config_path: Path | None, out_dir: Path, workers: int | None) -> None:
    """Simulate the candidate pool, the held-out set and the pseudo-experiment."""
    config = load_config(config_path, _workers(workers))
    _emit(save_data(prepare_data(config), out_dir, config.seed))


@cli.command("fit-sindyc")
@DATA_OPTION
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--target", type=click.Choice(["ghx", "tes"]), default="ghx")
@click.option("--threshold", type=float, default=None, help="STLSQ threshold override")
@click.option("--ridge", type=float, default=None, help="Ridge penalty override")
@handle_errors
def fit_sindyc_command(
    data_dir: Path, out_path: Path, target: str, threshold: float | None, ridge: float | None
) -> None:
    """Fit one linear model to every non-held-out trajectory."""
    dataset, manifest = load_dataset(data_dir / "manifest.json")
    train = dataset.without(manifest.held_out_ids)
    overrides = {
        key: value for key, value in (("threshold", threshold), ("ridge", ridge)) if value is not None
    }
    cfg = StlsqConfig.model_validate(
        {**StlsqConfig.for_target(target).model_dump(), **overrides}  # type: ignore[arg-type]
    )
    model = fit_sindyc(train, cfg, target)  # type: ignore[arg-type]
    _emit({"sindyc": save_linear_model(model, cfg, out_path)})


@cli.command("build-ensemble")
@CONFIG_OPTION
@DATA_OPTION
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--mvg", "mvg_path", type=click.Path(path_type=Path), default=None)
@click.option("--workers", type=int, default=None)
@handle_errors
def build_ensemble_command(
    config_path: Path | None,
    data_dir: Path,
    out_path: Path,
    mvg_path: Path | None,
    workers: int | None,
) -> None:
    """Fit the coefficient ensemble and, optionally, its Gaussian."""
    config = load_config(config_path, _workers(workers))
    ensemble = build_run_ensemble(config, load_data(data_dir).pool)
    written = {"ensemble": save_ensemble(ensemble, out_path)}
    if mvg_path is not None:
        written["mvg"] = save_mvg(fit_mvg(ensemble), ensemble, mvg_path)
    _emit(written)


@cli.command()
@CONFIG_OPTION
@DATA_OPTION
@click.option("--kind", type=click.Choice(["fnn", "gru"]), required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--with-experiment", is_flag=True, help="Add the denoised pseudo-experiment")
@handle_errors
def train(
    config_path: Path | None, data_dir: Path, kind: str, out_path: Path, with_experiment: bool
) -> None:
    """Train a neural surrogate on the candidate pool."""
    config = load_config(config_path)
    data = load_data(data_dir)
    label = f"train/{kind}_exp" if with_experiment else f"train/{kind}"
    model = train_surrogate(
        kind,  # type: ignore[arg-type]
        data.pool,
        config.fnn if kind == "fnn" else config.gru,
        RngStream(seed=config.seed, stream_label=label),
        extra=Dataset.of([data.experiment.denoised]) if with_experiment else None,
    )
    _emit({kind: save_neural(model, out_path)})


@cli.command("al-run")
@CONFIG_OPTION
@DATA_OPTION
@click.option("--family", type=click.Choice(list(BRANCHES)), required=True)
@click.option("--arm", type=click.Choice(["al", "random"]), default="al")
@click.option("--ensemble", "ensemble_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@handle_errors
def al_run(
    config_path: Path | None,
    data_dir: Path,
    family: str,
    arm: str,
    ensemble_path: Path | None,
    out_path: Path,
) -> None:
    """Run one active-learning or random arm and write its history CSV."""
    config = load_config(config_path)
    if family not in config.arms:
        raise ConfigError(f"No AL arm configured for {family}")
    data = load_data(data_dir)
    ensemble: CoefficientEnsemble | None = None
    reference = None
    if family == "mvg":
        ensemble = load_ensemble(ensemble_path) if ensemble_path else build_run_ensemble(config, data.pool)
        reference = reference_vector(config, data.experiment)
    inputs = AlInputs(
        pool=data.pool,
        eval_set=data.eval_set,
        experiment=data.experiment.denoised,
        ensemble=ensemble,
        reference=reference,
    )
    spec = config.arms[family]  # type: ignore[index]
    strategy = spec.strategy if arm == "al" else RandomStrategy()
    base = RngStream(seed=config.seed, stream_label=f"al/{family}")
    runner = ActiveLearningRunner(
        BranchTrainer(config.stlsq, config.rollout, config.fnn, config.gru), config.timing
    )
    state = runner.run(
        family,  # type: ignore[arg-type]
        strategy,
        spec.loop,
        inputs,
        base.child("active" if arm == "al" else "random"),
        base.child("init"),
    )
    _emit({f"history_{family}_{arm}": write_history_csv(state, out_path)})


@cli.command()
@CONFIG_OPTION
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@click.option("--workers", type=int, default=None)
@handle_errors
def compare(config_path: Path | None, out_dir: Path | None, workers: int | None) -> None:
    """Full pipeline: data, models, paired AL/random arms, manifest and report."""
    settings = get_settings()
    config = load_config(config_path, _workers(workers))
    harness = ExperimentHarness(config, out_dir or settings.output_dir)
    manifest = harness.run()
    _emit({"manifest": harness.root / RUN_MANIFEST, "report": harness.root / "report" / "report.md"})
    logger.info(f"Run {manifest.run_id}: {len(manifest.artifacts)} artifacts")


@cli.command()
@click.option("--runs", "runs_dir", type=click.Path(path_type=Path), required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
@handle_errors
def report(runs_dir: Path, out_dir: Path | None) -> None:
    """Rebuild the report bundle of one or more runs from their artifacts."""
    roots = find_runs(runs_dir)
    merged = merge_reports([evaluate_run(root) for root in roots])
    target = out_dir or (roots[0] / "report" if len(roots) == 1 else runs_dir / "report")
    _emit(write_report(merged, target))


@cli.command()
@click.argument("kind", type=click.Choice(["lookback", "subset-size"]))
@CONFIG_OPTION
@DATA_OPTION
@click.option("--values", required=True, help="Comma-separated lookbacks or subset sizes")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@handle_errors
def study(kind: str, config_path: Path | None, data_dir: Path, values: str, out_path: Path) -> None:
    """Lookback-length or ensemble subset-size study, written as CSV."""
    try:
        sizes = [int(v) for v in values.split(",") if v.strip()]
    except ValueError as e:
        raise ParameterError(f"--values must be integers: {values}") from e
    config = load_config(config_path)
    data = load_data(data_dir)
    if kind == "lookback":
        frame = lookback_study(
            sizes,
            data.pool,
            data.eval_set,
            config.gru,
            RngStream(seed=config.seed, stream_label="study/lookback"),
        )
    else:
        frame = subset_size_study(
            sizes,
            data.pool,
            data.experiment.denoised,
            config.ensemble_size,
            config.stlsq,
            RngStream(seed=config.seed, stream_label="study/subset"),
            config.band_samples,
            config.rollout,
        )
    out_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_path, index=False, float_format="%.10g", lineterminator="\n")
    _emit({"study": out_path})


def main() -> None:
    """Run the main CLI entry point."""
    cli(prog_name="thermocline-twin")


if __name__ == "__main__":
    main()
