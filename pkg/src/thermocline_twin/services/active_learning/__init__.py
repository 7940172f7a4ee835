"""Active-learning queries, the per-arm loop and paired comparisons."""

from thermocline_twin.services.active_learning.comparison import (
    HISTORY_COLUMNS,
    ComparisonResult,
    compare_family,
    curve_rows,
    history_frame,
    run_comparison,
    runtime_row,
    selected_to_reach,
    write_comparison,
    write_history_csv,
)
from thermocline_twin.services.active_learning.loop import (
    ActiveLearningRunner,
    AlInputs,
    evaluate_surrogate,
    run_al_loop,
)
from thermocline_twin.services.active_learning.queries import (
    channel_scales,
    prediction_errors,
    query_by_error,
    query_mahalanobis,
    query_models_by_error,
    query_random,
)
from thermocline_twin.services.active_learning.surrogates import (
    BranchTrainer,
    FnnSurrogate,
    GruSurrogate,
    LinearSurrogate,
    MvgSurrogate,
    Surrogate,
)

__all__ = [
    "HISTORY_COLUMNS",
    "ActiveLearningRunner",
    "AlInputs",
    "BranchTrainer",
    "ComparisonResult",
    "FnnSurrogate",
    "GruSurrogate",
    "LinearSurrogate",
    "MvgSurrogate",
    "Surrogate",
    "channel_scales",
    "compare_family",
    "curve_rows",
    "evaluate_surrogate",
    "history_frame",
    "prediction_errors",
    "query_by_error",
    "query_mahalanobis",
    "query_models_by_error",
    "query_random",
    "run_al_loop",
    "run_comparison",
    "runtime_row",
    "selected_to_reach",
    "write_comparison",
    "write_history_csv",
]
