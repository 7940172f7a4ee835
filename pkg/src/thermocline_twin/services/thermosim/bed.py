"""Method-of-lines packed-bed model: upwind advection plus fluid/filler exchange."""

from collections.abc import Callable

import numpy as np
from scipy.integrate import solve_ivp

from thermocline_twin.exceptions import IntegrationError, ParameterError, ShapeError
from thermocline_twin.models.thermosim import BedConfig, BedInputs, BedState, SolverTolerance
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

RhsFunction = Callable[[float, np.ndarray], np.ndarray]


def make_bed_rhs(cfg: BedConfig, n_nodes: int, inlet_temp: float, mass_flow: float) -> RhsFunction:
    """Right-hand side ``f(t, y)`` for ``y = [T_fluid, T_filler]`` under fixed inputs.

    Positive ``mass_flow`` enters at node 0 (top) and moves down the bed;
    negative flow enters at the bottom node and moves up.
    """
    dz = cfg.height / n_nodes
    velocity = cfg.velocity(mass_flow)
    exchange = cfg.hc_at(mass_flow) * cfg.surface_area
    fluid_cap = cfg.fluid_capacity
    filler_cap = cfg.filler_capacity
    loss = cfg.k_loss
    t_amb = cfg.t_amb
    charging = mass_flow >= 0.0
    grad = np.empty(n_nodes)

    def rhs(_t: float, y: np.ndarray) -> np.ndarray:
        t_fluid = y[:n_nodes]
        t_filler = y[n_nodes:]
        if charging:
            grad[0] = t_fluid[0] - inlet_temp
            grad[1:] = t_fluid[1:] - t_fluid[:-1]
        else:
            grad[:-1] = t_fluid[1:] - t_fluid[:-1]
            grad[-1] = inlet_temp - t_fluid[-1]
        flux = exchange * (t_filler - t_fluid)
        d_fluid = -velocity * grad / dz + flux / fluid_cap
        if loss:
            d_fluid = d_fluid + loss * (t_amb - t_fluid) / fluid_cap
        d_filler = -flux / filler_cap
        return np.concatenate([d_fluid, d_filler])

    return rhs


def bed_rhs(state: BedState, inlet_temp: float, mass_flow: float, cfg: BedConfig) -> BedState:
    """Time derivative of ``state`` returned as a ``BedState`` of rates [K/s].

    The axial spacing is ``cfg.height / state.n_nodes``.
    """
    rhs = make_bed_rhs(cfg, state.n_nodes, inlet_temp, mass_flow)
    return BedState.from_vector(rhs(0.0, state.as_vector()))


def integrate_bed(
    state: BedState,
    inputs: BedInputs,
    offsets: np.ndarray,
    cfg: BedConfig,
    tol: SolverTolerance,
) -> np.ndarray:
    """Integrate under fixed inputs and sample at ``offsets`` seconds from now.

    Returns an array of shape ``(len(offsets), 2 * n_nodes)``.
    """
    offsets = np.asarray(offsets, dtype=float)
    if offsets.ndim != 1 or offsets.size == 0 or offsets[0] < 0 or np.any(np.diff(offsets) <= 0):
        raise ShapeError("Sample offsets must be non-negative and strictly increasing")
    y0 = state.as_vector()
    if offsets[-1] == 0.0:
        return y0[np.newaxis, :].copy()
    rhs = make_bed_rhs(cfg, state.n_nodes, inputs.inlet_temp, inputs.mass_flow)
    solution = solve_ivp(
        rhs,
        (0.0, float(offsets[-1])),
        y0,
        method=tol.method,
        t_eval=offsets,
        rtol=tol.rtol,
        atol=tol.atol,
    )
    if not solution.success:
        reached = float(solution.t[-1]) if solution.t.size else 0.0
        raise IntegrationError(
            f"Bed integration stopped at t={reached:.6g} s: {solution.message}",
            time_reached=reached,
        )
    logger.debug(f"Bed segment of {offsets[-1]:.1f} s took {solution.nfev} RHS evaluations")
    return np.asarray(solution.y.T)


def step_bed(
    state: BedState,
    inputs: BedInputs,
    dt: float,
    cfg: BedConfig,
    tol: SolverTolerance | None = None,
) -> BedState:
    """Advance the bed by ``dt`` seconds with an adaptive embedded Runge-Kutta pair."""
    if dt <= 0:
        raise ParameterError(f"dt must be positive, got {dt}", dt=dt)
    samples = integrate_bed(state, inputs, np.array([dt]), cfg, tol or SolverTolerance())
    return BedState.from_vector(samples[-1])
