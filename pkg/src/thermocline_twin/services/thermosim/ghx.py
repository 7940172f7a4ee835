"""Lumped glycol heat exchanger with a first-order bypass valve."""

import math

from thermocline_twin.models.data import ControlVector, GhxState
from thermocline_twin.models.thermosim import GhxConfig


def ghx_outputs(
    bed_out_temp: float, valve_fraction: float, m_pump_out: float, gcfg: GhxConfig
) -> tuple[float, float]:
    """Bypass flow and heat rate for a given valve opening."""
    path_flow = valve_fraction * m_pump_out
    m_ghx = max(m_pump_out - path_flow, 0.0)
    c_min = min(m_pump_out * gcfg.fluid_heat_capacity, gcfg.glycol_capacity_rate)
    q_ghx = gcfg.effectiveness * c_min * (bed_out_temp - gcfg.glycol_inlet_temp) * valve_fraction
    return m_ghx, max(q_ghx, 0.0)


def lag_valve(previous: float, target: float, dt: float, gcfg: GhxConfig) -> float:
    """Exact first-order lag update over ``dt`` toward ``target``."""
    fraction = target + (previous - target) * math.exp(-dt / gcfg.valve_time_constant)
    return min(max(fraction, 0.0), 1.0)


def ghx_step(
    bed_out_temp: float,
    controls: ControlVector,
    prev: GhxState,
    dt: float,
    gcfg: GhxConfig,
) -> GhxState:
    """Advance the valve lag by ``dt`` under held controls and evaluate the exchanger.

    The GHX path carries ``valve_fraction * m_pump_out``; the rest bypasses.
    """
    fraction = lag_valve(prev.valve_fraction, controls.pv006, dt, gcfg)
    m_ghx, q_ghx = ghx_outputs(bed_out_temp, fraction, controls.m_pump_out, gcfg)
    return GhxState(m_ghx=m_ghx, q_ghx=q_ghx, valve_fraction=fraction)


def steady_ghx(bed_out_temp: float, controls: ControlVector, gcfg: GhxConfig) -> GhxState:
    """State with the valve settled at its setpoint."""
    m_ghx, q_ghx = ghx_outputs(bed_out_temp, controls.pv006, controls.m_pump_out, gcfg)
    return GhxState(m_ghx=m_ghx, q_ghx=q_ghx, valve_fraction=controls.pv006)
