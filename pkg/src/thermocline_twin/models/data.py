"""Shared domain types: time grid, channel records, trajectories and streams."""

import hashlib
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from thermocline_twin.exceptions import ShapeError
from thermocline_twin.models.base import FloatArray, FrozenModel

CONTROL_CHANNELS: tuple[str, ...] = ("pv006", "m_pump_out", "t_pump_in", "t_heater_out")
GHX_CHANNELS: tuple[str, ...] = ("m_ghx", "q_ghx")
TES_CHANNELS: tuple[str, ...] = ("m_tes_in", "t_tes_out", "t_top", "t_mid", "t_bot")
STATE_CHANNELS: dict[str, tuple[str, ...]] = {"ghx": GHX_CHANNELS, "tes": TES_CHANNELS}

KELVIN_OFFSET = 273.15


def celsius_to_kelvin(value: np.ndarray | float) -> np.ndarray | float:
    """Convert Celsius to Kelvin."""
    return value + KELVIN_OFFSET


def kelvin_to_celsius(value: np.ndarray | float) -> np.ndarray | float:
    """Convert Kelvin to Celsius."""
    return value - KELVIN_OFFSET


class TimeGrid(BaseModel):
    """Uniform time grid ``t0 + k*dt`` for ``k = 0 .. n_steps-1``."""

    model_config = ConfigDict(frozen=True)

    t0: float = 0.0
    dt: float = Field(gt=0)
    n_steps: int = Field(ge=2)

    @classmethod
    def from_span(cls, n_steps: int, span: float, t0: float = 0.0) -> "TimeGrid":
        """Grid with ``n_steps`` points covering ``[t0, t0 + span]``."""
        return cls(t0=t0, dt=span / (n_steps - 1), n_steps=n_steps)

    @property
    def span(self) -> float:
        return self.dt * (self.n_steps - 1)

    @property
    def t_end(self) -> float:
        return self.t0 + self.span

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps, dtype=float)

    def is_compatible(self, other: "TimeGrid", rtol: float = 1e-12) -> bool:
        """Same number of points and (to rounding) the same origin and spacing."""
        return (
            self.n_steps == other.n_steps
            and bool(np.isclose(self.dt, other.dt, rtol=rtol, atol=0.0))
            and bool(np.isclose(self.t0, other.t0, rtol=0.0, atol=rtol * max(self.span, 1.0)))
        )


class ControlVector(BaseModel):
    """Actuator setpoints at one time sample."""

    model_config = ConfigDict(frozen=True)

    pv006: float = Field(ge=0.0, le=1.0)
    m_pump_out: float = Field(ge=0.0)
    t_pump_in: float = Field(gt=0.0)
    t_heater_out: float = Field(gt=0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.pv006, self.m_pump_out, self.t_pump_in, self.t_heater_out])


class GhxState(BaseModel):
    """Heat exchanger outputs plus the lagged valve opening that drives them."""

    model_config = ConfigDict(frozen=True)

    m_ghx: float = Field(ge=0.0, allow_inf_nan=False)
    q_ghx: float = Field(ge=0.0, allow_inf_nan=False)
    valve_fraction: float = Field(default=0.0, ge=0.0, le=1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.m_ghx, self.q_ghx])


class TesState(BaseModel):
    """Storage tank observables at one time sample."""

    model_config = ConfigDict(frozen=True)

    m_tes_in: float
    t_tes_out: float = Field(gt=0.0)
    t_top: float = Field(gt=0.0)
    t_mid: float = Field(gt=0.0)
    t_bot: float = Field(gt=0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.m_tes_in, self.t_tes_out, self.t_top, self.t_mid, self.t_bot])


class Provenance(str, Enum):
    """Origin of a trajectory."""

    SIMULATED = "simulated"
    PSEUDO_EXPERIMENTAL = "pseudo_experimental"


class Trajectory(FrozenModel):
    """Time-aligned controls and states on a uniform grid.

    Channels are stored column-wise: ``controls`` is ``(n_steps, 4)``, ``ghx`` is
    ``(n_steps, 2)`` and ``tes`` is ``(n_steps, 5)`` in the order of
    ``CONTROL_CHANNELS``, ``GHX_CHANNELS`` and ``TES_CHANNELS``.
    """

    id: int = Field(ge=0)
    grid: TimeGrid
    controls: FloatArray
    ghx: FloatArray
    tes: FloatArray
    provenance: Provenance = Provenance.SIMULATED

    @model_validator(mode="after")
    def _check_shapes(self) -> "Trajectory":
        expected = {
            "controls": len(CONTROL_CHANNELS),
            "ghx": len(GHX_CHANNELS),
            "tes": len(TES_CHANNELS),
        }
        for name, width in expected.items():
            array = getattr(self, name)
            if array.shape != (self.grid.n_steps, width):
                raise ShapeError(
                    f"Trajectory {self.id}: {name} has shape {array.shape}, "
                    f"expected {(self.grid.n_steps, width)}",
                    trajectory_id=self.id,
                    channel_group=name,
                )
            if not np.all(np.isfinite(array)):
                raise ShapeError(
                    f"Trajectory {self.id}: {name} contains non-finite values",
                    trajectory_id=self.id,
                    channel_group=name,
                )
        return self

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def states(self, target: str = "ghx") -> np.ndarray:
        """State block for a surrogate target (``ghx`` or ``tes``)."""
        if target == "ghx":
            return self.ghx
        if target == "tes":
            return self.tes
        raise ShapeError(f"Unknown state target: {target}", target=target)

    def channel(self, name: str) -> np.ndarray:
        """Single channel by name."""
        for block, names in (
            (self.controls, CONTROL_CHANNELS),
            (self.ghx, GHX_CHANNELS),
            (self.tes, TES_CHANNELS),
        ):
            if name in names:
                return block[:, names.index(name)]
        raise ShapeError(f"Unknown channel: {name}", channel=name)

    def control_vectors(self) -> list[ControlVector]:
        return [ControlVector(**dict(zip(CONTROL_CHANNELS, row))) for row in self.controls]

    def ghx_states(self) -> list[GhxState]:
        return [GhxState(m_ghx=row[0], q_ghx=row[1]) for row in self.ghx]

    def tes_states(self) -> list[TesState]:
        return [TesState(**dict(zip(TES_CHANNELS, row))) for row in self.tes]

    def replace(self, **changes: object) -> "Trajectory":
        """Validated copy with some fields replaced."""
        fields = {name: getattr(self, name) for name in type(self).model_fields}
        fields.update(changes)
        return Trajectory(**fields)


class Dataset(FrozenModel):
    """Ordered, non-empty collection of trajectories on one grid."""

    trajectories: tuple[Trajectory, ...]
    grid: TimeGrid

    @model_validator(mode="after")
    def _check_homogeneous(self) -> "Dataset":
        if not self.trajectories:
            raise ShapeError("Dataset must contain at least one trajectory")
        ids = [traj.id for traj in self.trajectories]
        if len(set(ids)) != len(ids):
            raise ShapeError("Trajectory ids must be unique within a dataset", ids=ids)
        for traj in self.trajectories:
            if not traj.grid.is_compatible(self.grid):
                raise ShapeError(
                    f"Trajectory {traj.id} grid differs from the dataset grid",
                    trajectory_id=traj.id,
                )
        return self

    @classmethod
    def of(cls, trajectories: "list[Trajectory] | tuple[Trajectory, ...]") -> "Dataset":
        """Dataset on the grid of the first trajectory."""
        items = tuple(trajectories)
        if not items:
            raise ShapeError("Dataset must contain at least one trajectory")
        return cls(trajectories=items, grid=items[0].grid)

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(traj.id for traj in self.trajectories)

    def by_id(self, trajectory_id: int) -> Trajectory:
        for traj in self.trajectories:
            if traj.id == trajectory_id:
                return traj
        raise ShapeError(f"No trajectory with id {trajectory_id}", trajectory_id=trajectory_id)

    def subset(self, ids: "list[int] | tuple[int, ...]") -> "Dataset":
        """Sub-dataset in the order of ``ids``."""
        lookup = {traj.id: traj for traj in self.trajectories}
        missing = [i for i in ids if i not in lookup]
        if missing:
            raise ShapeError(f"Unknown trajectory ids: {missing}", ids=missing)
        return Dataset(trajectories=tuple(lookup[i] for i in ids), grid=self.grid)

    def without(self, ids: "list[int] | tuple[int, ...]") -> "Dataset":
        excluded = set(ids)
        return self.subset([i for i in self.ids if i not in excluded])


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


class RngStream(BaseModel):
    """Named, reproducible random stream.

    ``generator()`` always starts the stream from its beginning: a Philox
    counter-based generator keyed by the seed and a stable hash of the label.
    """

    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=2**64)
    stream_label: str = Field(min_length=1, max_length=128)

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(self.seed, spawn_key=(_label_key(self.stream_label),))
        return np.random.Generator(np.random.Philox(sequence))

    def child(self, label: str) -> "RngStream":
        """Independent sub-stream ``<label>/<child>``."""
        return RngStream(seed=self.seed, stream_label=f"{self.stream_label}/{label}")
