"""Coefficient ensembles, their Gaussian fit and predictive bands."""

import numpy as np
from pydantic import BaseModel, Field, model_validator

from thermocline_twin.exceptions import NumericError, ShapeError
from thermocline_twin.models.base import FloatArray, FrozenModel
from thermocline_twin.models.sindyc import LinearModel, Target


class CoefficientEnsemble(FrozenModel):
    """Flattened coefficient vectors of linear models fitted to trajectory subsets.

    ``model_ids`` are dense candidate ids; ``subset_ids[i]`` lists the
    trajectories behind row ``i``.
    """

    vectors: FloatArray
    subset_ids: tuple[tuple[int, ...], ...]
    model_ids: tuple[int, ...]
    state_dim: int = Field(ge=1)
    input_dim: int = Field(ge=0)
    target: Target = "ghx"
    failed_subsets: tuple[tuple[int, ...], ...] = ()
    seed: int | None = None
    stream_label: str | None = None

    @model_validator(mode="after")
    def _check_rows(self) -> "CoefficientEnsemble":
        width = self.state_dim * (1 + self.state_dim + self.input_dim)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != width:
            raise ShapeError(f"Ensemble vectors {self.vectors.shape} do not have width {width}")
        if not (len(self.subset_ids) == len(self.model_ids) == self.vectors.shape[0]):
            raise ShapeError("Ensemble ids and vectors differ in length")
        if not np.all(np.isfinite(self.vectors)):
            raise NumericError("Ensemble contains non-finite coefficients")
        return self

    @property
    def n_models(self) -> int:
        return int(self.vectors.shape[0])

    def row(self, model_id: int) -> int:
        try:
            return self.model_ids.index(model_id)
        except ValueError as e:
            raise ShapeError(f"Unknown model id {model_id}", model_id=model_id) from e

    def vector(self, model_id: int) -> np.ndarray:
        return np.asarray(self.vectors[self.row(model_id)])

    def model(self, model_id: int) -> LinearModel:
        return LinearModel.unflatten(
            self.vector(model_id),
            self.state_dim,
            self.input_dim,
            self.target,
            self.subset_ids[self.row(model_id)],
        )

    def subset(self, model_ids: "list[int] | tuple[int, ...]") -> "CoefficientEnsemble":
        rows = [self.row(i) for i in model_ids]
        return CoefficientEnsemble(
            vectors=self.vectors[rows] if rows else np.empty((0, self.vectors.shape[1])),
            subset_ids=tuple(self.subset_ids[r] for r in rows),
            model_ids=tuple(model_ids),
            state_dim=self.state_dim,
            input_dim=self.input_dim,
            target=self.target,
            seed=self.seed,
            stream_label=self.stream_label,
        )


class MvgModel(FrozenModel):
    """Multivariate Gaussian over flattened coefficient vectors."""

    mean: FloatArray
    covariance: FloatArray
    shrinkage: float = Field(ge=0)
    state_dim: int = Field(ge=1)
    input_dim: int = Field(ge=0)
    target: Target = "ghx"
    model_ids: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_moments(self) -> "MvgModel":
        p = self.mean.shape[0] if self.mean.ndim == 1 else -1
        if self.covariance.shape != (p, p):
            raise ShapeError(f"Covariance {self.covariance.shape} does not match mean ({p},)")
        if p != self.state_dim * (1 + self.state_dim + self.input_dim):
            raise ShapeError("Mean length does not match the model dimensions")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.covariance))):
            raise NumericError("Non-finite Gaussian moments")
        if not np.allclose(self.covariance, self.covariance.T, rtol=0.0, atol=1e-12):
            raise NumericError("Covariance is not symmetric")
        return self

    @property
    def dimension(self) -> int:
        return int(self.mean.shape[0])

    def mean_model(self) -> LinearModel:
        return LinearModel.unflatten(self.mean, self.state_dim, self.input_dim, self.target)

    def factor(self) -> np.ndarray:
        """Matrix ``L`` with ``L L^T = covariance``.

        Falls back to an eigen-decomposition with negative eigenvalues dropped
        when the Cholesky factorization fails numerically.
        """
        try:
            return np.asarray(np.linalg.cholesky(self.covariance))
        except np.linalg.LinAlgError:
            values, vectors = np.linalg.eigh(self.covariance)
            return np.asarray(vectors * np.sqrt(np.clip(values, 0.0, None)))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """``(count, P)`` coefficient draws."""
        noise = rng.standard_normal((count, self.dimension))
        return np.asarray(self.mean + noise @ self.factor().T)


class PredictiveBand(FrozenModel):
    """Monte-Carlo mean and central 95% band of sampled rollouts."""

    times: FloatArray
    mean: FloatArray
    lower: FloatArray
    upper: FloatArray
    n_samples: int = Field(ge=1)
    n_discarded: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_order(self) -> "PredictiveBand":
        if not (self.mean.shape == self.lower.shape == self.upper.shape):
            raise ShapeError("Band arrays differ in shape")
        if self.mean.shape[0] != self.times.shape[0]:
            raise ShapeError("Band length does not match its time axis")
        if np.any(self.lower > self.mean) or np.any(self.mean > self.upper):
            raise NumericError("Band ordering lower <= mean <= upper violated")
        return self

    @property
    def width(self) -> np.ndarray:
        return np.asarray(self.upper - self.lower)


class MvgArtifact(BaseModel):
    """JSON form of a fitted Gaussian plus ensemble provenance."""

    state_dim: int
    input_dim: int
    target: Target
    mean: list[float]
    covariance: list[list[float]]
    shrinkage: float
    model_ids: list[int]
    subset_ids: list[list[int]]
    seed: int | None = None
    stream_label: str | None = None
