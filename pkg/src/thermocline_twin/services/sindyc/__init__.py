"""Linear SINDyC identification and rollout."""

from thermocline_twin.services.sindyc.fit import (
    fit_sindyc,
    load_linear_model,
    regression_rows,
    save_linear_model,
)
from thermocline_twin.services.sindyc.library import build_library, estimate_derivatives, library_names
from thermocline_twin.services.sindyc.rollout import rollout, rollout_on
from thermocline_twin.services.sindyc.stlsq import StlsqResult, stlsq_fit, stlsq_solve

__all__ = [
    "StlsqResult",
    "build_library",
    "estimate_derivatives",
    "fit_sindyc",
    "library_names",
    "load_linear_model",
    "regression_rows",
    "rollout",
    "rollout_on",
    "save_linear_model",
    "stlsq_fit",
    "stlsq_solve",
]
