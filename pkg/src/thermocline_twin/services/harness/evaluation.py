"""Evaluation of trained surrogates and the Markdown / CSV report bundle."""

import math
import time
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel

from thermocline_twin.exceptions import InstabilityError
from thermocline_twin.models.data import Dataset, RngStream, Trajectory
from thermocline_twin.models.harness import (
    BandRecord,
    ClosestMatchRow,
    CoverageRow,
    CurveRow,
    Report,
    RuntimeRow,
    ScoreRow,
)
from thermocline_twin.models.mvg import MvgModel
from thermocline_twin.models.sindyc import RolloutConfig
from thermocline_twin.services.active_learning import Surrogate, curve_rows
from thermocline_twin.services.data import channel_rmse
from thermocline_twin.services.harness.pools import closest_match, control_distances
from thermocline_twin.services.mvg import coverage, predictive_band, write_band_csv
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

REPORT_FLOAT_FORMAT = "%.10g"


def _score(family: str, run_id: str, dataset: str, pred: np.ndarray, truth: Trajectory) -> ScoreRow:
    rmse_m, rmse_q = channel_rmse(pred, truth.ghx)
    return ScoreRow(
        family=family, run_id=run_id, dataset=dataset, rmse_m=float(rmse_m), rmse_q=float(rmse_q)
    )


def evaluate_all(
    models: Mapping[str, tuple[str, Surrogate]],
    eval_set: Dataset,
    experiment: Trajectory | None = None,
    mvg: tuple[str, MvgModel] | None = None,
    band_samples: int = 1000,
    band_stream: RngStream | None = None,
    rollout: RolloutConfig | None = None,
    histories: Mapping[tuple[str, str], pd.DataFrame] | None = None,
    train_set: Dataset | None = None,
    pool: Dataset | None = None,
    run_id: str = "run",
    config: dict[str, Any] | None = None,
    seeds: dict[str, int] | None = None,
) -> Report:
    """Score every model on every held-out trajectory and the pseudo-experiment.

    ``models`` maps a family label to ``(run_id, surrogate)``. With
    ``train_set`` each model is also scored on those trajectories (diagnostic
    rows ``train:<id>``). With ``pool`` and ``experiment`` the pool trajectory
    with the nearest controls is scored against the experiment as is. Every
    predictive band is kept on the report. Nothing is trained or written here.
    """
    start = time.perf_counter()
    rows: list[ScoreRow] = []
    for family, (model_run, surrogate) in models.items():
        targets = [(f"sim:{t.id}", t) for t in eval_set.trajectories]
        if train_set is not None:
            targets += [(f"train:{t.id}", t) for t in train_set.trajectories]
        if experiment is not None:
            targets.append(("experiment", experiment))
        preds = surrogate.predict_many([t for _, t in targets])
        for (label, traj), pred in zip(targets, preds):
            if isinstance(pred, np.ndarray):
                rows.append(_score(family, model_run, label, pred, traj))
            else:
                logger.warning(f"{family} could not predict {label}: {pred.message}")
                rows.append(
                    ScoreRow(family=family, run_id=model_run, dataset=label, rmse_m=math.inf, rmse_q=math.inf)
                )

    closest: list[ClosestMatchRow] = []
    if pool is not None and experiment is not None and len(pool):
        distances = control_distances(pool, experiment)
        match = closest_match(pool, experiment)
        rmse_m, rmse_q = channel_rmse(match.ghx, experiment.ghx)
        closest.append(
            ClosestMatchRow(
                run_id=run_id,
                trajectory_id=match.id,
                control_distance=float(distances[pool.ids.index(match.id)]),
                rmse_m=float(rmse_m),
                rmse_q=float(rmse_q),
            )
        )

    coverage_rows: list[CoverageRow] = []
    bands: list[BandRecord] = []
    if mvg is not None:
        mvg_run, mvg_model = mvg
        stream = band_stream or RngStream(seed=0, stream_label="report/band")
        targets = [(f"sim:{t.id}", t) for t in eval_set.trajectories]
        if experiment is not None:
            targets.append(("experiment", experiment))
        for label, traj in targets:
            try:
                band = predictive_band(
                    mvg_model, traj.ghx[0], traj.controls, traj.grid, band_samples, stream.child(label), rollout
                )
            except InstabilityError as e:
                logger.warning(f"No predictive band for {label}: {e.message}")
                continue
            bands.append(BandRecord(run_id=mvg_run, dataset=label, band=band))
            cov_m, cov_q = coverage(band, traj.ghx)
            coverage_rows.append(
                CoverageRow(
                    family="mvg",
                    run_id=mvg_run,
                    dataset=label,
                    coverage_m=float(cov_m),
                    coverage_q=float(cov_q),
                    n_samples=band.n_samples,
                    n_discarded=band.n_discarded,
                )
            )

    curves: list[CurveRow] = []
    runtime: list[RuntimeRow] = []
    families = sorted({family for family, _ in (histories or {})})
    for family in families:
        frames = {arm: (histories or {}).get((family, arm)) for arm in ("al", "random")}
        for arm, frame in frames.items():
            if frame is not None:
                curves.extend(curve_rows(family, arm, frame))
        al, rnd = frames["al"], frames["random"]
        if al is not None and rnd is not None and len(al) and len(rnd):
            al_total = float(al["wall_s"].sum())
            random_total = float(rnd["wall_s"].sum())
            runtime.append(
                RuntimeRow(
                    family=family,
                    al_total_s=al_total,
                    random_total_s=random_total,
                    ratio=al_total / random_total if random_total > 0 else math.nan,
                    al_final_n=int(al["n_selected"].iloc[-1]),
                    random_final_n=int(rnd["n_selected"].iloc[-1]),
                )
            )

    logger.info(
        f"Evaluated {len(models)} models ({len(rows)} scores, {len(coverage_rows)} bands) "
        f"in {time.perf_counter() - start:.2f} seconds"
    )
    return Report(
        run_id=run_id,
        rmse=tuple(rows),
        coverage=tuple(coverage_rows),
        curves=tuple(curves),
        runtime=tuple(runtime),
        closest=tuple(closest),
        bands=tuple(bands),
        config=config or {},
        seeds=seeds or {},
    )


def _frame(rows: tuple[BaseModel, ...], columns: list[str]) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in rows], columns=columns)


def _markdown_table(frame: pd.DataFrame) -> str:
    def cell(value: object) -> str:
        if isinstance(value, float):
            return REPORT_FLOAT_FORMAT % value
        return str(value)

    header = "| " + " | ".join(frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *body])


def report_frames(report: Report) -> dict[str, pd.DataFrame]:
    return {
        "rmse": _frame(report.rmse, list(ScoreRow.model_fields)),
        "coverage": _frame(report.coverage, list(CoverageRow.model_fields)),
        "curves": _frame(report.curves, list(CurveRow.model_fields)),
        "runtime": _frame(report.runtime, list(RuntimeRow.model_fields)),
        "closest": _frame(report.closest, list(ClosestMatchRow.model_fields)),
    }


def write_report(report: Report, out_dir: Path) -> dict[str, Path]:
    """One CSV per table, ``band_<dataset>.csv`` per predictive band, and ``report.md``.

    Band files of a merged report carry their run id: ``band_<run>_<dataset>.csv``.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    frames = report_frames(report)
    written: dict[str, Path] = {}
    for name, frame in frames.items():
        path = out_dir / f"{name}.csv"
        frame.to_csv(path, index=False, float_format=REPORT_FLOAT_FORMAT, lineterminator="\n")
        written[name] = path

    merged = len({record.run_id for record in report.bands}) > 1
    for record in report.bands:
        stem = record.file_stem
        if merged:
            stem = stem.replace("band_", f"band_{record.run_id}_", 1)
        written[stem] = write_band_csv(record.band, out_dir / f"{stem}.csv")

    sections = [
        f"# Run report `{report.run_id}`",
        "",
        "## Prediction error (RMSE) on held-out simulations and the pseudo-experiment",
        "",
        _markdown_table(frames["rmse"]),
        "",
        "## Predictive band coverage (MvG-SINDyC, 95% band)",
        "",
        _markdown_table(frames["coverage"]) if len(frames["coverage"]) else "_no MvG model_",
        "",
        "## Closest simulated trajectory to the pseudo-experiment",
        "",
        _markdown_table(frames["closest"]) if len(frames["closest"]) else "_no candidate pool_",
        "",
        "## Active learning versus random sampling",
        "",
        _markdown_table(frames["curves"]) if len(frames["curves"]) else "_no comparison histories_",
        "",
        "## Runtime",
        "",
        _markdown_table(frames["runtime"]) if len(frames["runtime"]) else "_no comparison histories_",
        "",
        "## Seeds",
        "",
        *[f"- `{name}`: {value}" for name, value in sorted(report.seeds.items())],
        "",
    ]
    path = out_dir / "report.md"
    path.write_text("\n".join(sections), encoding="utf-8")
    written["report"] = path
    return written
