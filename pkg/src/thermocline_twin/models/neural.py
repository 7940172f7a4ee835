"""Neural surrogate models, normalization statistics and training settings."""

from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Self

from thermocline_twin.exceptions import NumericError, ShapeError
from thermocline_twin.models.base import FloatArray, FrozenModel

NormalizerMode = Literal["zscore", "minmax"]


class Normalizer(FrozenModel):
    """Affine feature scaling ``z = (x - offset) / scale``."""

    offset: FloatArray
    scale: FloatArray
    mode: NormalizerMode = "zscore"

    @model_validator(mode="after")
    def _check(self) -> "Normalizer":
        if self.offset.shape != self.scale.shape or self.offset.ndim != 1:
            raise ShapeError("Normalizer offset and scale must be equal-length vectors")
        if np.any(self.scale <= 0):
            raise NumericError("Normalizer scales must be positive")
        return self

    @classmethod
    def fit(cls, data: np.ndarray, mode: NormalizerMode = "zscore") -> "Normalizer":
        """Statistics of the rows of ``data``; constant features get unit scale."""
        data = np.asarray(data, dtype=float)
        if mode == "minmax":
            offset = data.min(axis=0)
            scale = data.max(axis=0) - offset
        else:
            offset = data.mean(axis=0)
            scale = data.std(axis=0)
        return cls(offset=offset, scale=np.where(scale > 0, scale, 1.0), mode=mode)

    @classmethod
    def identity(cls, width: int) -> "Normalizer":
        return cls(offset=np.zeros(width), scale=np.ones(width))

    @property
    def width(self) -> int:
        return int(self.offset.size)

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray((values - self.offset) / self.scale)

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values * self.scale + self.offset)


class TrainConfig(BaseModel):
    """Adam / MSE training settings and network shape."""

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    epochs: int = Field(default=40, ge=1)
    batch_size: int = Field(default=256, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    hidden_width: int = Field(default=128, ge=1)
    hidden_layers: int = Field(default=2, ge=1)
    lookback: int = Field(default=120, ge=1)
    window_stride: int = Field(default=1, ge=1, description="Spacing of GRU training windows")
    fnn_one_step: bool = False
    experiment_weight: float = Field(default=1.0, gt=0)

    @classmethod
    def fnn_full(cls) -> "TrainConfig":
        return cls(epochs=40, batch_size=256, hidden_width=128)

    @classmethod
    def gru_full(cls) -> "TrainConfig":
        return cls(epochs=20, batch_size=64, hidden_width=128, lookback=120)

    @classmethod
    def fnn_desk(cls) -> "TrainConfig":
        return cls(epochs=40, batch_size=256, hidden_width=32)

    @classmethod
    def gru_desk(cls) -> "TrainConfig":
        return cls(epochs=8, batch_size=64, hidden_width=32, lookback=30, window_stride=4)


class _NetworkBase(FrozenModel):
    params: dict[str, FloatArray]
    input_norm: Normalizer
    output_norm: Normalizer
    training_losses: tuple[float, ...] = ()
    train_config: TrainConfig | None = None
    seed: int | None = None
    stream_label: str | None = None

    def _check_params(self, shapes: dict[str, tuple[int, ...]]) -> None:
        if set(shapes) != set(self.params):
            raise ShapeError(
                f"Parameter names {sorted(self.params)} do not match {sorted(shapes)}"
            )
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise ShapeError(
                    f"Parameter {name} has shape {self.params[name].shape}, expected {shape}"
                )
            if not np.all(np.isfinite(self.params[name])):
                raise NumericError(f"Parameter {name} has non-finite entries")

    def with_params(self, params: dict[str, np.ndarray], **changes: object) -> Self:
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(changes, params=params)
        return type(self)(**fields)


class FnnModel(_NetworkBase):
    """Fully connected network, rectifier on hidden layers, linear output."""

    kind: Literal["fnn"] = "fnn"
    layer_dims: tuple[int, ...]
    one_step: bool = False

    @model_validator(mode="after")
    def _check_chain(self) -> "FnnModel":
        if len(self.layer_dims) < 2:
            raise ShapeError("An FNN needs at least an input and an output layer")
        self._check_params(self.param_shapes(self.layer_dims))
        if self.input_norm.width != self.layer_dims[0] or self.output_norm.width != self.layer_dims[-1]:
            raise ShapeError("Normalizer widths do not match the layer dims")
        return self

    @staticmethod
    def param_shapes(layer_dims: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        for layer, (fan_in, fan_out) in enumerate(zip(layer_dims[:-1], layer_dims[1:])):
            shapes[f"W{layer}"] = (fan_in, fan_out)
            shapes[f"b{layer}"] = (fan_out,)
        return shapes

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1


class GruModel(_NetworkBase):
    """Stacked GRU layers read over a lookback window, rectified linear output.

    Gate blocks in every ``W`` / ``U`` / ``b`` are ordered update, reset, candidate.
    """

    kind: Literal["gru"] = "gru"
    input_dim: int = Field(ge=1)
    hidden_dims: tuple[int, ...]
    output_dim: int = Field(ge=1)
    lookback: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_chain(self) -> "GruModel":
        if not self.hidden_dims:
            raise ShapeError("A GRU needs at least one recurrent layer")
        self._check_params(self.param_shapes(self.input_dim, self.hidden_dims, self.output_dim))
        if self.input_norm.width != self.input_dim or self.output_norm.width != self.output_dim:
            raise ShapeError("Normalizer widths do not match the GRU dims")
        return self

    @staticmethod
    def param_shapes(
        input_dim: int, hidden_dims: tuple[int, ...], output_dim: int
    ) -> dict[str, tuple[int, ...]]:
        shapes: dict[str, tuple[int, ...]] = {}
        fan_in = input_dim
        for layer, width in enumerate(hidden_dims):
            shapes[f"gru{layer}.W"] = (fan_in, 3 * width)
            shapes[f"gru{layer}.U"] = (width, 3 * width)
            shapes[f"gru{layer}.b"] = (3 * width,)
            fan_in = width
        shapes["out.W"] = (fan_in, output_dim)
        shapes["out.b"] = (output_dim,)
        return shapes


NeuralModel = Annotated[FnnModel | GruModel, Field(discriminator="kind")]


class NeuralArtifact(BaseModel):
    """Envelope for a serialized network."""

    format_version: int = 1
    model: NeuralModel
