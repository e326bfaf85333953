"""Composite dynamic load component shares per bus.

A bus's component fractions are the RCI-weighted mix of the class rows of a
composition table for the current period of day.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError, ValidationError

PERIODS = ("Peak", "Shoulder", "Light")
CLASSES = ("RES", "COM", "IND")
COMPONENTS = ("motor_a", "motor_b", "motor_c", "motor_d", "electronic", "static_zip")

# percentages: Motor A, B, C, D, Electronic, Static
DEFAULT_TABLE = {
    ("Peak", "RES"): (8, 7, 2, 34, 15, 34),
    ("Peak", "COM"): (12, 10, 4, 25, 18, 31),
    ("Peak", "IND"): (13, 22, 16, 0, 27, 22),
    ("Shoulder", "RES"): (8, 7, 2, 25, 19, 39),
    ("Shoulder", "COM"): (12, 10, 4, 20, 23, 31),
    ("Shoulder", "IND"): (13, 22, 16, 0, 27, 22),
    ("Light", "RES"): (10, 8, 2, 0, 40, 40),
    ("Light", "COM"): (12, 10, 4, 5, 38, 31),
    ("Light", "IND"): (13, 22, 16, 0, 27, 22),
}

# half-open [start, end) hour windows; a window may wrap midnight
DEFAULT_PERIOD_WINDOWS = {
    "Peak": [(14, 19)],
    "Shoulder": [(7, 14), (19, 22)],
    "Light": [(22, 7)],
}


@dataclass(frozen=True)
class CompositionTable:
    rows: dict

    def __post_init__(self):
        rows = {tuple(k): tuple(float(v) for v in vals) for k, vals in self.rows.items()}
        for key, vals in rows.items():
            if len(vals) != len(COMPONENTS):
                raise ConfigurationError(f"composition row {key} needs {len(COMPONENTS)} values")
            if abs(sum(vals) - 100.0) > 0.5:
                raise ConfigurationError(f"composition row {key} sums to {sum(vals)}, expected 100")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def default(cls) -> "CompositionTable":
        return cls(DEFAULT_TABLE)

    def matrix(self, period: str) -> np.ndarray:
        """(3, 6) array of percentages for RES, COM, IND."""
        try:
            return np.array([self.rows[(period, c)] for c in CLASSES])
        except KeyError as exc:
            raise ConfigurationError(f"composition table has no row {exc.args[0]}") from exc


@dataclass(frozen=True)
class BusComposition:
    bus_id: int
    period: str
    fractions: np.ndarray


def mix_fractions(rci, period: str, table: CompositionTable | None = None) -> np.ndarray:
    """Component fractions for RCI ratio(s); rows of ``rci`` are mixed independently."""
    table = table or CompositionTable.default()
    rci = np.asarray(rci, dtype=float)
    percent = rci @ table.matrix(period)
    # dividing by the row total renormalizes and converts percent in one step,
    # so integer table rows come back as exactly row / 100
    return percent / percent.sum(axis=-1, keepdims=True)


def compose(bus, period: str, table: CompositionTable | None = None) -> BusComposition:
    if period not in PERIODS:
        raise ValidationError(f"unknown period {period!r}")
    return BusComposition(bus_id=bus.id, period=period,
                          fractions=mix_fractions(bus.rci_ratio, period, table))


def _expand(window):
    start, end = window
    if start == end:
        return set(range(24))
    if start < end:
        return set(range(start, end))
    return set(range(start, 24)) | set(range(0, end))


def validate_period_windows(windows: dict) -> None:
    seen = {}
    for period, spans in windows.items():
        if period not in PERIODS:
            raise ConfigurationError(f"unknown period {period!r} in period windows")
        for span in spans:
            for h in _expand(tuple(int(v) for v in span)):
                if h in seen and seen[h] != period:
                    raise ConfigurationError(f"hour {h} is in both {seen[h]} and {period}")
                seen[h] = period
    missing = sorted(set(range(24)) - set(seen))
    if missing:
        raise ConfigurationError(f"hours {missing} are not covered by any period window")


def classify_period(hour_of_day: float, windows: dict | None = None) -> str:
    """Period containing ``hour_of_day`` (half-open windows)."""
    windows = windows or DEFAULT_PERIOD_WINDOWS
    if not (0 <= hour_of_day < 24):
        raise ValidationError(f"hour_of_day must be in [0, 24), got {hour_of_day}")
    validate_period_windows(windows)
    h = int(np.floor(hour_of_day))
    for period, spans in windows.items():
        for span in spans:
            if h in _expand(tuple(int(v) for v in span)):
                return period
    raise ConfigurationError(f"hour {h} not covered")  # unreachable after validation


class LoadCompositionTransformer(TransformerMixin, BaseEstimator):
    """Map an ``(n_buses, 3)`` RCI array to ``(n_buses, 6)`` component fractions."""

    def __init__(self, period="Peak", table=None):
        self.period = period
        self.table = table

    def fit(self, X, y=None):
        if self.period not in PERIODS:
            raise ValidationError(f"unknown period {self.period!r}")
        self.table_ = self.table or CompositionTable.default()
        self.table_.matrix(self.period)
        self.n_features_in_ = 3
        return self

    def transform(self, X):
        X = check_array(X)
        if X.shape[1] != 3:
            raise ValidationError("RCI input needs 3 columns")
        table = getattr(self, "table_", None) or self.table or CompositionTable.default()
        return mix_fractions(X, self.period, table)


def write_compositions(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("bus_id", "period") + COMPONENTS)
        for comp in rows:
            writer.writerow([comp.bus_id, comp.period] + [f"{v:.6f}" for v in comp.fractions])
