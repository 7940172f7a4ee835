"""Linear SINDyC models and their fitting / rollout settings."""

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from thermocline_twin.exceptions import NumericError, ShapeError
from thermocline_twin.models.base import FloatArray, FrozenModel

COLUMN_ORDER = "constant|states|controls"

Target = Literal["ghx", "tes"]


class StlsqConfig(BaseModel):
    """Sequential thresholded least squares settings."""

    model_config = ConfigDict(frozen=True)

    threshold: float = Field(default=1e-8, ge=0, description="Coefficient cutoff lambda")
    ridge: float = Field(default=1e-6, ge=0, description="L2 penalty alpha")
    max_iters: int = Field(default=20, ge=1)
    normalize_columns: bool = True
    smoothing_window: int | None = Field(
        default=None, ge=1, description="Savitzky-Golay window applied before differencing"
    )
    smoothing_order: int = Field(default=3, ge=0)

    @classmethod
    def ghx(cls) -> "StlsqConfig":
        return cls(threshold=1e-8, ridge=1e-6)

    @classmethod
    def tes(cls) -> "StlsqConfig":
        return cls(threshold=1e-6, ridge=1e-3)

    @classmethod
    def for_target(cls, target: Target) -> "StlsqConfig":
        return cls.tes() if target == "tes" else cls.ghx()


class RolloutConfig(BaseModel):
    """Surrogate rollout integration settings.

    ``exact`` propagates the zero-order-hold solution through the matrix
    exponential of each step instead of adaptive integration.
    """

    model_config = ConfigDict(frozen=True)

    rtol: float = Field(default=1e-12, gt=0, lt=1)
    atol: float = Field(default=1e-12, gt=0, lt=1)
    method: Literal["Radau", "BDF", "LSODA", "RK45", "exact"] = "Radau"
    blowup_bound: float = Field(default=1e8, gt=0)


class LinearModel(FrozenModel):
    """``dx/dt = A x + B u + d``."""

    A: FloatArray
    B: FloatArray
    d: FloatArray
    target: Target = "ghx"
    subset_ids: tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_dims(self) -> "LinearModel":
        n_x = self.d.shape[0] if self.d.ndim == 1 else -1
        if self.A.shape != (n_x, n_x) or self.B.ndim != 2 or self.B.shape[0] != n_x:
            raise ShapeError(
                f"Inconsistent shapes A{self.A.shape} B{self.B.shape} d{self.d.shape}"
            )
        for name in ("A", "B", "d"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NumericError(f"LinearModel.{name} has non-finite entries")
        return self

    @property
    def state_dim(self) -> int:
        return int(self.d.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.B.shape[1])

    @property
    def n_coefficients(self) -> int:
        return self.state_dim * (1 + self.state_dim + self.input_dim)

    def coefficient_matrix(self) -> np.ndarray:
        """Xi with one column per state equation, rows ordered constant | states | controls."""
        return np.vstack([self.d[np.newaxis, :], self.A.T, self.B.T])

    def flatten(self) -> np.ndarray:
        """Per state equation ``[d_i, A_i., B_i.]``, equations concatenated."""
        return np.asarray(self.coefficient_matrix().T.ravel())

    @classmethod
    def unflatten(
        cls,
        vector: np.ndarray,
        state_dim: int,
        input_dim: int,
        target: Target = "ghx",
        subset_ids: tuple[int, ...] = (),
    ) -> "LinearModel":
        width = 1 + state_dim + input_dim
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (state_dim * width,):
            raise ShapeError(
                f"Coefficient vector has shape {vector.shape}, expected {(state_dim * width,)}"
            )
        rows = vector.reshape(state_dim, width)
        return cls(
            A=rows[:, 1 : 1 + state_dim],
            B=rows[:, 1 + state_dim :],
            d=rows[:, 0],
            target=target,
            subset_ids=subset_ids,
        )

    def fixed_point(self, controls: np.ndarray) -> np.ndarray:
        """Equilibrium ``-A^{-1}(B u + d)`` for held controls."""
        return np.asarray(-np.linalg.solve(self.A, self.B @ controls + self.d))


class SindycArtifact(BaseModel):
    """JSON form of a fitted model."""

    state_dim: int
    input_dim: int
    target: Target
    column_order: str = COLUMN_ORDER
    library_terms: list[str] = Field(default_factory=list, description="Library column names, in order")
    coefficients: list[float]
    config: StlsqConfig
    subset_ids: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_terms(self) -> "SindycArtifact":
        n_terms = 1 + self.state_dim + self.input_dim
        if self.library_terms and len(self.library_terms) != n_terms:
            raise ValueError(
                f"library_terms names {len(self.library_terms)} columns, expected {n_terms}"
            )
        return self

    @classmethod
    def from_model(cls, model: LinearModel, config: StlsqConfig) -> "SindycArtifact":
        return cls(
            state_dim=model.state_dim,
            input_dim=model.input_dim,
            target=model.target,
            coefficients=model.flatten().tolist(),
            config=config,
            subset_ids=list(model.subset_ids),
        )

    def to_model(self) -> LinearModel:
        return LinearModel.unflatten(
            np.asarray(self.coefficients),
            self.state_dim,
            self.input_dim,
            self.target,
            tuple(self.subset_ids),
        )
