"""Experiment orchestration: pools, pseudo-experiments, runs, studies and reports."""

from thermocline_twin.services.harness.evaluation import evaluate_all, report_frames, write_report
from thermocline_twin.services.harness.pools import (
    REGIME_A,
    REGIME_B,
    build_pool,
    build_two_regime_pool,
    closest_match,
    control_distances,
    experiment_schedule,
    generator_for,
)
from thermocline_twin.services.harness.pseudo import add_noise, make_pseudo_experiment
from thermocline_twin.services.harness.runner import (
    RUN_MANIFEST,
    ExperimentHarness,
    RunData,
    build_run_ensemble,
    evaluate_run,
    find_runs,
    load_data,
    merge_reports,
    prepare_data,
    read_run_manifest,
    reference_vector,
    run_id_for,
    save_data,
    save_models,
    train_run_models,
)
from thermocline_twin.services.harness.studies import lookback_study, subset_size_study

__all__ = [
    "REGIME_A",
    "REGIME_B",
    "RUN_MANIFEST",
    "ExperimentHarness",
    "RunData",
    "add_noise",
    "build_pool",
    "build_run_ensemble",
    "build_two_regime_pool",
    "closest_match",
    "control_distances",
    "evaluate_all",
    "evaluate_run",
    "experiment_schedule",
    "find_runs",
    "generator_for",
    "load_data",
    "lookback_study",
    "make_pseudo_experiment",
    "merge_reports",
    "prepare_data",
    "read_run_manifest",
    "reference_vector",
    "report_frames",
    "run_id_for",
    "save_data",
    "save_models",
    "train_run_models",
    "write_report",
]
