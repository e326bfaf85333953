"""Re-scaling of hourly loads to minutely values with an assigned pattern."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import CoverageError, ValidationError
from .assignment import ZoneAssignment
from .hourly import HourlyBusLoad
from .patterns import LoadPatternLibrary
from .scaling import endpoint_line


@dataclass(frozen=True)
class MinutelyBusLoad:
    bus_id: int
    hour: int
    minute_mw: np.ndarray


def rescale(start_mw: float, end_mw: float, pattern) -> np.ndarray:
    """Line from ``start_mw`` to ``end_mw`` times the per-unit pattern."""
    pattern = np.asarray(pattern, dtype=float)
    if start_mw < 0 or end_mw < 0:
        raise ValidationError("hourly loads must be nonnegative")
    return endpoint_line(float(start_mw), float(end_mw), pattern.size) * pattern


def rescale_to_minutes(hourly: HourlyBusLoad, assignment: ZoneAssignment, lib: LoadPatternLibrary,
                       hour: int, zone_id: int) -> MinutelyBusLoad:
    """Minutely load for ``hour`` using the pattern assigned to ``zone_id``."""
    if hour + 1 >= hourly.hourly_mw.size:
        raise CoverageError(
            f"bus {hourly.bus_id}: hour {hour + 1} is past the end of the hourly series "
            f"({hourly.hourly_mw.size} hours); extend the hourly series")
    k = assignment.pattern_of(zone_id)
    values = rescale(hourly.hourly_mw[hour], hourly.hourly_mw[hour + 1], lib.patterns[k])
    return MinutelyBusLoad(bus_id=hourly.bus_id, hour=hour, minute_mw=values)


def add_forecast_noise(values, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Multiply by ``1 + N(0, sigma)``; values stay nonnegative. ``sigma = 0`` is a no-op."""
    values = np.asarray(values, dtype=float)
    if sigma == 0:
        return values.copy()
    return np.clip(values * (1.0 + rng.normal(0.0, sigma, values.shape)), 0.0, None)
