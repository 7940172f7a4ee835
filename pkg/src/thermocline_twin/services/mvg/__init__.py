"""Probabilistic SINDyC: coefficient ensembles, Gaussian fit and predictive bands."""

from thermocline_twin.services.mvg.artifacts import (
    load_ensemble,
    load_mvg,
    save_ensemble,
    save_mvg,
)
from thermocline_twin.services.mvg.band import coverage, predictive_band, write_band_csv
from thermocline_twin.services.mvg.ensemble import build_ensemble, draw_subsets
from thermocline_twin.services.mvg.gaussian import (
    default_shrinkage,
    fit_mvg,
    mahalanobis,
    mahalanobis_many,
)

__all__ = [
    "build_ensemble",
    "coverage",
    "default_shrinkage",
    "draw_subsets",
    "fit_mvg",
    "load_ensemble",
    "load_mvg",
    "mahalanobis",
    "mahalanobis_many",
    "predictive_band",
    "save_ensemble",
    "save_mvg",
    "write_band_csv",
]
