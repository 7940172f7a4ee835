"""Paired AL-versus-random comparisons and their history files."""

import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from thermocline_twin.models.active_learning import AlState, Branch, RandomStrategy
from thermocline_twin.models.data import GHX_CHANNELS, RngStream
from thermocline_twin.models.harness import CurveRow, ExperimentConfig, RuntimeRow
from thermocline_twin.services.active_learning.loop import ActiveLearningRunner, AlInputs
from thermocline_twin.services.active_learning.surrogates import BranchTrainer
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

HISTORY_COLUMNS = (
    "round",
    "n_selected",
    "rmse_m",
    "rmse_q",
    "rmse_exp_m",
    "rmse_exp_q",
    "wall_s",
    "cum_wall_s",
)
HISTORY_FLOAT_FORMAT = "%.10g"


@dataclass(frozen=True)
class ComparisonResult:
    family: Branch
    active: AlState
    random: AlState


def history_frame(state: AlState) -> pd.DataFrame:
    """History rows in CSV column order; missing experiment errors are NaN."""
    rows = []
    cumulative = 0.0
    for record in state.history:
        cumulative += record.wall_s
        exp = record.rmse_exp or (math.nan, math.nan)
        rows.append(
            (
                record.round,
                record.n_selected,
                record.rmse[0],
                record.rmse[1],
                exp[0],
                exp[1],
                record.wall_s,
                cumulative,
            )
        )
    return pd.DataFrame(rows, columns=list(HISTORY_COLUMNS))


def write_history_csv(state: AlState, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    history_frame(state).to_csv(
        path, index=False, float_format=HISTORY_FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def curve_rows(family: str, arm: str, frame: pd.DataFrame) -> list[CurveRow]:
    rows = []
    for record in frame.itertuples(index=False):
        values = record._asdict()
        rows.append(
            CurveRow(
                family=family,
                arm=arm,
                round=int(values["round"]),
                n_selected=int(values["n_selected"]),
                **{k: float(values[k]) for k in HISTORY_COLUMNS[2:]},
            )
        )
    return rows


def selected_to_reach(
    state: AlState, threshold: float, channel: str = "q_ghx"
) -> int | None:
    """Smallest selection size whose eval RMSE on ``channel`` is at most ``threshold``."""
    column = GHX_CHANNELS.index(channel)
    for record in state.history:
        if not record.failed and record.rmse[column] <= threshold:
            return record.n_selected
    return None


def runtime_row(result: ComparisonResult) -> RuntimeRow:
    """Total recorded wall time per arm and their ratio at the final round."""
    al_total = float(sum(r.wall_s for r in result.active.history))
    random_total = float(sum(r.wall_s for r in result.random.history))
    ratio = al_total / random_total if random_total > 0 else math.nan
    return RuntimeRow(
        family=result.family,
        al_total_s=al_total,
        random_total_s=random_total,
        ratio=ratio,
        al_final_n=result.active.history[-1].n_selected,
        random_final_n=result.random.history[-1].n_selected,
    )


def compare_family(
    family: Branch,
    config: ExperimentConfig,
    inputs: AlInputs,
    trainer: BranchTrainer | None = None,
) -> ComparisonResult:
    """Run the AL and random arms of one family on the same inputs.

    Both arms share the initial selection; each consumes its own substream.
    Early stopping is disabled so the two curves have equal round counts.
    """
    arm = config.arms[family]
    loop = arm.loop.model_copy(update={"early_stop": False})
    base = RngStream(seed=config.seed, stream_label=f"al/{family}")
    runner = ActiveLearningRunner(trainer, config.timing)
    init_stream = base.child("init")
    active = runner.run(family, arm.strategy, loop, inputs, base.child("active"), init_stream)
    random = runner.run(family, RandomStrategy(), loop, inputs, base.child("random"), init_stream)
    return ComparisonResult(family=family, active=active, random=random)


def run_comparison(
    config: ExperimentConfig,
    inputs: AlInputs,
    families: tuple[Branch, ...] | None = None,
    trainer: BranchTrainer | None = None,
) -> dict[Branch, ComparisonResult]:
    """Paired AL / random arms for every configured family, in config order."""
    trainer = trainer or BranchTrainer(config.stlsq, config.rollout, config.fnn, config.gru)
    start = time.perf_counter()
    results: dict[Branch, ComparisonResult] = {}
    for family in families or config.families:
        results[family] = compare_family(family, config, inputs, trainer)
        row = runtime_row(results[family])
        final_al = results[family].active.history[-1].rmse
        final_random = results[family].random.history[-1].rmse
        logger.info(
            f"{family}: AL final rmse {np.round(final_al, 6).tolist()} vs random "
            f"{np.round(final_random, 6).tolist()} (time ratio {row.ratio:.3g})"
        )
    logger.info(f"Comparison completed in {time.perf_counter() - start:.2f} seconds")
    return results


def write_comparison(results: dict[Branch, ComparisonResult], out_dir: Path) -> dict[str, Path]:
    """``history_<family>_<arm>.csv`` per arm plus ``runtime.csv``."""
    written: dict[str, Path] = {}
    for family, result in results.items():
        for arm, state in (("al", result.active), ("random", result.random)):
            name = f"history_{family}_{arm}"
            written[name] = write_history_csv(state, out_dir / f"{name}.csv")
    runtime = pd.DataFrame([runtime_row(r).model_dump() for r in results.values()])
    path = out_dir / "runtime.csv"
    runtime.to_csv(path, index=False, float_format=HISTORY_FLOAT_FORMAT, lineterminator="\n")
    written["runtime"] = path
    return written
