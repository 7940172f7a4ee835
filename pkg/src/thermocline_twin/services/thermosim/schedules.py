"""Sobol-parameterized actuator schedules."""

import warnings

import numpy as np
from scipy.stats import qmc

from thermocline_twin.exceptions import ParameterError
from thermocline_twin.models.data import CONTROL_CHANNELS, RngStream, TimeGrid
from thermocline_twin.models.thermosim import (
    ActuatorBounds,
    ActuatorProfile,
    ActuatorRange,
    ActuatorSchedule,
)
from thermocline_twin.utils import logging_service

logger = logging_service.get_logger(__name__)

MAX_DRAWS_PER_SCHEDULE = 1000


class SobolSource:
    """Sequential Sobol points; the leading all-zero point of the unscrambled sequence is skipped."""

    def __init__(self, dimension: int, stream: RngStream | None = None):
        scramble = stream is not None
        self._sampler = qmc.Sobol(
            d=dimension, scramble=scramble, seed=stream.generator() if stream else None
        )
        self._sampler.fast_forward(1)

    def draw(self, n: int) -> np.ndarray:
        with warnings.catch_warnings():
            # balance warnings for non power-of-two draws
            warnings.simplefilter("ignore", UserWarning)
            return np.asarray(self._sampler.random(n))


def sobol_points(n: int, dimension: int = 1, stream: RngStream | None = None) -> np.ndarray:
    """First ``n`` Sobol points after the origin; scrambled when a stream is given."""
    return SobolSource(dimension, stream).draw(n)


def _actuator_profile(
    point: np.ndarray,
    value_range: ActuatorRange,
    max_switches: int,
    window: tuple[float, float],
    binary: bool,
) -> ActuatorProfile:
    def level(u: float) -> float:
        if binary:
            return value_range.low if u < 0.5 else value_range.high
        return value_range.level(u)

    start, stop = window
    n_switches = min(int(point[1] * (max_switches + 1)), max_switches) if stop > start else 0
    times = sorted(start + point[2 + j] * (stop - start) for j in range(n_switches))
    levels = [level(point[2 + max_switches + j]) for j in range(n_switches)]
    return ActuatorProfile(initial=level(point[0]), switch_times=tuple(times), levels=tuple(levels))


def schedule_from_point(
    point: np.ndarray,
    bounds: ActuatorBounds,
    grid: TimeGrid,
    stagger_gap: float,
    schedule_id: int,
) -> ActuatorSchedule:
    """Decode one Sobol point into a schedule.

    Per actuator the point holds: initial level, switch count, switch times and
    switch levels. Raises ``ParameterError`` when the decoded schedule breaks the
    stagger constraint.
    """
    width = 2 + 2 * bounds.max_switches
    window = (grid.t0 + stagger_gap, grid.t_end - stagger_gap)
    profiles = {}
    for index, (name, value_range) in enumerate(zip(CONTROL_CHANNELS, bounds.ranges())):
        block = point[index * width : (index + 1) * width]
        profiles[name] = _actuator_profile(
            block,
            value_range,
            bounds.max_switches,
            window,
            binary=bounds.binary_valve and name == "pv006",
        )
    return ActuatorSchedule(id=schedule_id, stagger_gap=stagger_gap, **profiles)


def generate_schedules(
    n: int,
    bounds: ActuatorBounds,
    grid: TimeGrid,
    stagger_gap: float,
    stream: RngStream,
) -> list[ActuatorSchedule]:
    """Draw ``n`` distinct, stagger-respecting schedules with dense ids ``0..n-1``.

    Rejected candidates are replaced by further points of the same Sobol
    sequence, so the result depends only on the arguments.
    """
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}", n=n)
    if stagger_gap < 0:
        raise ParameterError("stagger_gap must be non-negative", stagger_gap=stagger_gap)

    dimension = len(CONTROL_CHANNELS) * (2 + 2 * bounds.max_switches)
    source = SobolSource(dimension, stream)
    schedules: list[ActuatorSchedule] = []
    seen: set[tuple[object, ...]] = set()
    rejected = 0
    drawn = 0
    while len(schedules) < n:
        if drawn >= MAX_DRAWS_PER_SCHEDULE * n:
            raise ParameterError(
                f"Could only draw {len(schedules)} of {n} feasible schedules",
                drawn=drawn,
                rejected=rejected,
            )
        batch = source.draw(max(n - len(schedules), 8))
        drawn += len(batch)
        for point in batch:
            try:
                schedule = schedule_from_point(point, bounds, grid, stagger_gap, len(schedules))
            except ParameterError:
                rejected += 1
                continue
            key = tuple(
                (p.initial, p.switch_times, p.levels) for p in schedule.profiles()
            )
            if key in seen:
                rejected += 1
                continue
            seen.add(key)
            schedules.append(schedule)
            if len(schedules) == n:
                break

    logger.info(f"Generated {n} schedules ({rejected} candidates rejected)")
    return schedules


def discharge_schedule(
    grid: TimeGrid,
    switch_time: float | None = None,
    m_pump_out: float = 0.35,
    t_pump_in: float = 340.0,
    t_heater_out: float = 450.0,
    schedule_id: int = 0,
) -> ActuatorSchedule:
    """Discharge run: valve open, closed at ``switch_time`` (mid-horizon by default)."""
    switch = grid.t0 + 0.5 * grid.span if switch_time is None else switch_time
    return ActuatorSchedule(
        id=schedule_id,
        pv006=ActuatorProfile(initial=1.0, switch_times=(switch,), levels=(0.0,)),
        m_pump_out=ActuatorProfile(initial=m_pump_out),
        t_pump_in=ActuatorProfile(initial=t_pump_in),
        t_heater_out=ActuatorProfile(initial=t_heater_out),
    )
