"""Packed-bed, heat exchanger and actuator schedule models."""

import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from thermocline_twin.exceptions import NumericError, ParameterError, ShapeError
from thermocline_twin.models.base import FloatArray, FrozenModel
from thermocline_twin.models.data import CONTROL_CHANNELS

GUARD_UPPER_K = 700.0
GUARD_MARGIN_K = 5.0


class BedConfig(BaseModel):
    """Geometry and material properties of the packed-bed tank.

    Node 0 sits at the top of the bed. Defaults describe a Therminol-66 /
    alumina bed; they are plausible placeholders, not a calibrated tank.
    """

    model_config = ConfigDict(frozen=True)

    radius: float = Field(default=0.6, gt=0, description="Tank radius R [m]")
    height: float = Field(default=3.0, gt=0, description="Bed height L [m]")
    n_nodes: int = Field(default=40, ge=3)
    porosity: float = Field(default=0.4, gt=0, lt=1)
    fluid_density: float = Field(default=900.0, gt=0)
    fluid_heat_capacity: float = Field(default=2200.0, gt=0)
    filler_density: float = Field(default=3950.0, gt=0)
    filler_heat_capacity: float = Field(default=880.0, gt=0)
    filler_radius: float = Field(default=0.01, gt=0)
    shape_factor: float = Field(default=3.0, gt=0)
    hc: float = Field(default=50.0, ge=0, description="Convective coefficient [W/(m2 K)]")
    k_loss: float = Field(default=0.0, ge=0, description="Wall loss per unit length [W/(m K)]")
    t_amb: float = Field(default=293.15, gt=0)
    hc_correlation: Literal["constant", "wakao"] = "constant"
    hc_reference_flow: float = Field(
        default=0.35, gt=0, description="Mass flow at which the Wakao form returns hc [kg/s]"
    )

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def dz(self) -> float:
        return self.height / self.n_nodes

    @property
    def surface_area(self) -> float:
        """Filler heat-transfer surface per unit bed length."""
        return self.shape_factor * self.area * (1.0 - self.porosity) / self.filler_radius

    @property
    def fluid_capacity(self) -> float:
        """Fluid heat capacity per unit length [J/(m K)]."""
        return self.fluid_density * self.fluid_heat_capacity * self.porosity * self.area

    @property
    def filler_capacity(self) -> float:
        """Filler heat capacity per unit length [J/(m K)]."""
        return self.filler_density * self.filler_heat_capacity * (1.0 - self.porosity) * self.area

    def velocity(self, mass_flow: float) -> float:
        """Signed interstitial axial velocity for a mass flow."""
        return mass_flow / (self.fluid_density * self.porosity * self.area)

    def hc_at(self, mass_flow: float) -> float:
        if self.hc_correlation == "wakao":
            return self.hc * (abs(mass_flow) / self.hc_reference_flow) ** 0.6
        return self.hc

    def node_depths(self) -> np.ndarray:
        """Depth of every node center below the top of the bed."""
        return (np.arange(self.n_nodes) + 0.5) * self.dz


class BedState(FrozenModel):
    """Fluid and filler temperature fields, node 0 at the top."""

    t_fluid: FloatArray
    t_filler: FloatArray

    @model_validator(mode="after")
    def _check_fields(self) -> "BedState":
        if self.t_fluid.ndim != 1 or self.t_fluid.shape != self.t_filler.shape:
            raise ShapeError(
                f"Fluid {self.t_fluid.shape} and filler {self.t_filler.shape} fields must be "
                "1-D and of equal length"
            )
        bad = np.flatnonzero(~(np.isfinite(self.t_fluid) & np.isfinite(self.t_filler)))
        if bad.size:
            raise NumericError(
                f"Non-finite bed temperature at node {int(bad[0])}", node=int(bad[0])
            )
        return self

    @property
    def n_nodes(self) -> int:
        return int(self.t_fluid.size)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.t_fluid, self.t_filler])

    @classmethod
    def from_vector(cls, vector: np.ndarray) -> "BedState":
        n = vector.size // 2
        return cls(t_fluid=vector[:n], t_filler=vector[n:])

    @classmethod
    def uniform(cls, temperature: float, n_nodes: int) -> "BedState":
        field = np.full(n_nodes, float(temperature))
        return cls(t_fluid=field, t_filler=field)

    @classmethod
    def thermocline(
        cls,
        cfg: BedConfig,
        t_hot: float,
        t_cold: float,
        front_height: float = 0.7,
        width: float = 0.1,
    ) -> "BedState":
        """Hot-over-cold tanh profile with the front at ``front_height`` (fraction from the bottom)."""
        heights = cfg.height - cfg.node_depths()
        scale = max(width * cfg.height, 1e-12)
        profile = t_cold + 0.5 * (t_hot - t_cold) * (
            1.0 + np.tanh((heights - front_height * cfg.height) / scale)
        )
        return cls(t_fluid=profile, t_filler=profile)

    def enthalpy(self, cfg: BedConfig) -> float:
        """Total sensible heat content relative to 0 K [J]."""
        return float(
            cfg.dz
            * (cfg.fluid_capacity * self.t_fluid.sum() + cfg.filler_capacity * self.t_filler.sum())
        )

    def check_guard(self, cfg: BedConfig, context: str = "") -> None:
        """Raise if any temperature leaves ``[t_amb - 5 K, 700 K]``."""
        lower = cfg.t_amb - GUARD_MARGIN_K
        fields = np.concatenate([self.t_fluid, self.t_filler])
        outside = np.flatnonzero((fields < lower) | (fields > GUARD_UPPER_K))
        if outside.size:
            node = int(outside[0] % self.n_nodes)
            raise NumericError(
                f"Bed temperature {fields[outside[0]]:.3f} K outside guard band at node {node}"
                + (f" ({context})" if context else ""),
                node=node,
            )


class BedInputs(BaseModel):
    """Boundary conditions held constant over one bed step."""

    model_config = ConfigDict(frozen=True)

    inlet_temp: float = Field(gt=0)
    mass_flow: float


class SolverTolerance(BaseModel):
    """Adaptive Runge-Kutta settings for the bed integrator."""

    model_config = ConfigDict(frozen=True)

    rtol: float = Field(default=1e-8, gt=0, lt=1)
    atol: float = Field(default=1e-8, gt=0, lt=1)
    method: Literal["RK45", "DOP853", "RK23"] = "RK45"


class GhxConfig(BaseModel):
    """Effectiveness heat exchanger with a lagged bypass valve."""

    model_config = ConfigDict(frozen=True)

    effectiveness: float = Field(default=0.8, gt=0, le=1)
    glycol_inlet_temp: float = Field(default=300.0, gt=0)
    glycol_capacity_rate: float = Field(default=500.0, gt=0, description="[W/K]")
    valve_time_constant: float = Field(default=20.0, gt=0, description="[s]")
    fluid_heat_capacity: float = Field(default=2200.0, gt=0, description="Hot side C_f [J/(kg K)]")


class ActuatorRange(BaseModel):
    """Inclusive setpoint range of one actuator."""

    model_config = ConfigDict(frozen=True)

    low: float
    high: float

    @model_validator(mode="after")
    def _check_order(self) -> "ActuatorRange":
        if not (math.isfinite(self.low) and math.isfinite(self.high)) or self.low > self.high:
            raise ParameterError(
                f"Infeasible actuator bounds [{self.low}, {self.high}]",
                low=self.low,
                high=self.high,
            )
        return self

    def level(self, u: float) -> float:
        return self.low + u * (self.high - self.low)


class ActuatorBounds(BaseModel):
    """Setpoint ranges for schedule generation."""

    model_config = ConfigDict(frozen=True)

    pv006: ActuatorRange = ActuatorRange(low=0.0, high=1.0)
    m_pump_out: ActuatorRange = ActuatorRange(low=0.2, high=0.5)
    t_pump_in: ActuatorRange = ActuatorRange(low=320.0, high=360.0)
    t_heater_out: ActuatorRange = ActuatorRange(low=430.0, high=480.0)
    max_switches: int = Field(default=3, ge=0, description="Per actuator")
    binary_valve: bool = Field(default=True, description="Snap valve levels to its range ends")

    @model_validator(mode="after")
    def _check_valve(self) -> "ActuatorBounds":
        if self.pv006.low < 0.0 or self.pv006.high > 1.0:
            raise ParameterError("pv006 bounds must lie in [0, 1]")
        if self.m_pump_out.low < 0.0:
            raise ParameterError("m_pump_out bounds must be non-negative")
        if self.t_pump_in.low <= 0.0 or self.t_heater_out.low <= 0.0:
            raise ParameterError("Temperature bounds must be positive")
        return self

    def ranges(self) -> tuple[ActuatorRange, ...]:
        return tuple(getattr(self, name) for name in CONTROL_CHANNELS)


class ActuatorProfile(BaseModel):
    """Piecewise-constant setpoint: ``initial`` until the first switch, then ``levels[k]``."""

    model_config = ConfigDict(frozen=True)

    initial: float
    switch_times: tuple[float, ...] = ()
    levels: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_switches(self) -> "ActuatorProfile":
        if len(self.switch_times) != len(self.levels):
            raise ParameterError("switch_times and levels must have equal length")
        if any(b <= a for a, b in zip(self.switch_times, self.switch_times[1:])):
            raise ParameterError("Switch times must be strictly increasing")
        return self

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        values = np.concatenate([[self.initial], np.asarray(self.levels, dtype=float)])
        index = np.searchsorted(np.asarray(self.switch_times, dtype=float), times, side="right")
        return np.asarray(values[index])


class ActuatorSchedule(BaseModel):
    """Setpoint schedules for the four actuators."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(default=0, ge=0)
    pv006: ActuatorProfile
    m_pump_out: ActuatorProfile
    t_pump_in: ActuatorProfile
    t_heater_out: ActuatorProfile
    stagger_gap: float = Field(default=50.0, ge=0)

    @model_validator(mode="after")
    def _check_stagger(self) -> "ActuatorSchedule":
        events = sorted(t for name in CONTROL_CHANNELS for t in getattr(self, name).switch_times)
        for a, b in zip(events, events[1:]):
            if b - a < self.stagger_gap:
                raise ParameterError(
                    f"Actuator switches at {a:.2f} s and {b:.2f} s are closer than "
                    f"the stagger gap {self.stagger_gap} s",
                    schedule_id=self.id,
                )
        return self

    @classmethod
    def constant(
        cls, values: "tuple[float, float, float, float]", schedule_id: int = 0, stagger_gap: float = 50.0
    ) -> "ActuatorSchedule":
        """Schedule holding each actuator at a fixed value."""
        profiles = {name: ActuatorProfile(initial=v) for name, v in zip(CONTROL_CHANNELS, values)}
        return cls(id=schedule_id, stagger_gap=stagger_gap, **profiles)

    def profiles(self) -> tuple[ActuatorProfile, ...]:
        return tuple(getattr(self, name) for name in CONTROL_CHANNELS)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        """Zero-order-hold setpoints, ``(len(times), 4)``."""
        return np.column_stack([profile.evaluate(times) for profile in self.profiles()])


class InitialBedSpec(BaseModel):
    """Initial thermocline used for generated trajectories."""

    model_config = ConfigDict(frozen=True)

    t_hot: float = Field(default=520.0, gt=0)
    t_cold: float = Field(default=330.0, gt=0)
    front_height: float = Field(default=0.7, ge=0, le=1)
    width: float = Field(default=0.08, gt=0)

    def build(self, cfg: BedConfig) -> BedState:
        return BedState.thermocline(cfg, self.t_hot, self.t_cold, self.front_height, self.width)
