"""Packed-bed thermocline and heat exchanger simulator."""

from thermocline_twin.services.thermosim.bed import bed_rhs, integrate_bed, step_bed
from thermocline_twin.services.thermosim.ghx import ghx_step, steady_ghx
from thermocline_twin.services.thermosim.schedules import (
    discharge_schedule,
    generate_schedules,
    sobol_points,
)
from thermocline_twin.services.thermosim.simulator import (
    SENSOR_HEIGHTS,
    TrajectoryGenerator,
    simulate,
)

__all__ = [
    "SENSOR_HEIGHTS",
    "TrajectoryGenerator",
    "bed_rhs",
    "discharge_schedule",
    "generate_schedules",
    "ghx_step",
    "integrate_bed",
    "simulate",
    "sobol_points",
    "steady_ghx",
    "step_bed",
]
