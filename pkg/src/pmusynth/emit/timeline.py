"""Common step grid and per-step injections."""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from ..exceptions import CoverageError, ValidationError

DEFAULT_POWER_FACTOR = 0.95


@dataclass(frozen=True)
class Timeline:
    start_utc: datetime
    step_s: int = 15
    horizon: int = 40   # number of steps; frames = horizon + 1

    def __post_init__(self):
        if self.step_s <= 0 or 60 % self.step_s:
            raise ValidationError(f"step {self.step_s} s must divide 60")
        if self.horizon < 1:
            raise ValidationError("horizon must be at least one step")
        if self.start_utc.tzinfo is None:
            object.__setattr__(self, "start_utc", self.start_utc.replace(tzinfo=timezone.utc))

    @property
    def offsets_s(self) -> np.ndarray:
        return np.arange(self.horizon + 1, dtype=float) * self.step_s

    @property
    def timestamps_us(self) -> list:
        start = int(self.start_utc.timestamp()) * 1_000_000 + self.start_utc.microsecond
        return [start + i * self.step_s * 1_000_000 for i in range(self.horizon + 1)]

    def instant(self, step: int) -> datetime:
        return self.start_utc + timedelta(seconds=step * self.step_s)


@dataclass(frozen=True)
class SeriesTable:
    """Columns of values sampled at ``offsets_s`` seconds from a timeline start."""

    name: str
    offsets_s: np.ndarray
    ids: tuple
    values: np.ndarray   # (n_samples, n_columns)

    def at(self, offsets_s, timeline: Timeline | None = None) -> np.ndarray:
        t = np.asarray(offsets_s, dtype=float)
        lo, hi = self.offsets_s[0], self.offsets_s[-1]
        outside = np.flatnonzero((t < lo - 1e-9) | (t > hi + 1e-9))
        if outside.size:
            when = timeline.instant(int(round(t[outside[0]] / timeline.step_s))).isoformat() \
                if timeline else f"{t[outside[0]]} s"
            raise CoverageError(f"{self.name} does not cover {when} "
                                f"(covers {lo:g} s to {hi:g} s)")
        return np.column_stack([np.interp(t, self.offsets_s, self.values[:, j])
                                for j in range(self.values.shape[1])])


@dataclass(frozen=True)
class StepInjections:
    load_p_clean: np.ndarray   # (steps, buses) interpolated MW
    load_p: np.ndarray         # with noise
    load_q: np.ndarray
    wind_p: np.ndarray         # (steps, farms) MW
    noise: np.ndarray          # applied relative noise


def reactive_factor(power_factor: float) -> float:
    return math.tan(math.acos(power_factor))


def build_timeline_inputs(case, loads: SeriesTable, wind: SeriesTable, timeline: Timeline,
                          noise_sigma=0.01, default_power_factor=DEFAULT_POWER_FACTOR,
                          rng: np.random.Generator | None = None) -> StepInjections:
    """Interpolate loads onto the step grid, add multiplicative noise, attach Q and wind.

    Load columns must follow case bus order and wind columns case farm order.
    """
    bus_ids = tuple(b.id for b in case.buses)
    farm_ids = tuple(w.id for w in case.wind_farms)
    if tuple(loads.ids) != bus_ids:
        raise ValidationError("load table columns must match case bus order")
    if tuple(wind.ids) != farm_ids:
        raise ValidationError("wind table columns must match case wind farm order")
    t = timeline.offsets_s
    clean = loads.at(t, timeline)
    if noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        noise = rng.normal(0.0, noise_sigma, clean.shape)
    else:
        noise = np.zeros_like(clean)
    load_p = clean * (1.0 + noise)
    ratios = np.array([reactive_factor(b.power_factor or default_power_factor) for b in case.buses])
    wind_p = wind.at(t, timeline) if farm_ids else np.zeros((t.size, 0))
    return StepInjections(load_p_clean=clean, load_p=load_p, load_q=load_p * ratios[None, :],
                          wind_p=wind_p, noise=noise)
