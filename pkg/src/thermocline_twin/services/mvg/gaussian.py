"""Gaussian fit over coefficient vectors and Mahalanobis distances."""

import numpy as np
from scipy import linalg

from thermocline_twin.exceptions import InsufficientDataError, ShapeError, SingularityError
from thermocline_twin.models.mvg import CoefficientEnsemble, MvgModel

DEFAULT_SHRINKAGE_SCALE = 1e-8
_SHRINKAGE_FLOOR = 1e-12


def default_shrinkage(covariance: np.ndarray) -> float:
    """``1e-8 * trace / P``, floored so a zero-spread ensemble stays invertible."""
    p = covariance.shape[0]
    return max(DEFAULT_SHRINKAGE_SCALE * float(np.trace(covariance)) / p, _SHRINKAGE_FLOOR)


def fit_mvg(ensemble: CoefficientEnsemble, shrinkage: float | None = None) -> MvgModel:
    """Row mean and unbiased covariance plus ``shrinkage * I``."""
    if ensemble.n_models < 2:
        raise InsufficientDataError(
            f"Need at least 2 models for a covariance, got {ensemble.n_models}",
            n_models=ensemble.n_models,
        )
    vectors = ensemble.vectors
    mean = vectors.mean(axis=0)
    covariance = np.atleast_2d(np.cov(vectors, rowvar=False, ddof=1))
    delta = default_shrinkage(covariance) if shrinkage is None else float(shrinkage)
    covariance = covariance + delta * np.eye(covariance.shape[0])
    covariance = 0.5 * (covariance + covariance.T)
    return MvgModel(
        mean=mean,
        covariance=covariance,
        shrinkage=delta,
        state_dim=ensemble.state_dim,
        input_dim=ensemble.input_dim,
        target=ensemble.target,
        model_ids=ensemble.model_ids,
    )


def _cholesky(covariance: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return linalg.cho_factor(covariance, lower=True, check_finite=True)  # type: ignore[no-any-return]
    except linalg.LinAlgError as e:
        raise SingularityError(
            "Covariance factorization failed; increase the shrinkage",
            hint="increase shrinkage",
        ) from e


def mahalanobis(a: np.ndarray, a_ref: np.ndarray, covariance: np.ndarray) -> float:
    """``sqrt((a - a_ref)^T Sigma^{-1} (a - a_ref))`` via a Cholesky solve."""
    return float(mahalanobis_many(np.atleast_2d(a), a_ref, covariance)[0])


def mahalanobis_many(
    vectors: np.ndarray, a_ref: np.ndarray, covariance: np.ndarray
) -> np.ndarray:
    """Distances of every row of ``vectors`` from ``a_ref`` with one factorization."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    a_ref = np.asarray(a_ref, dtype=float).ravel()
    covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
    p = a_ref.size
    if vectors.shape[1] != p or covariance.shape != (p, p):
        raise ShapeError(
            f"Dimension mismatch: vectors {vectors.shape}, reference ({p},), "
            f"covariance {covariance.shape}"
        )
    factor = _cholesky(covariance)
    diff = (vectors - a_ref).T
    solved = linalg.cho_solve(factor, diff)
    squared = np.einsum("ij,ij->j", diff, solved)
    return np.sqrt(np.clip(squared, 0.0, None))
