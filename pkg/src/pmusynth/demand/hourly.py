"""Bottom-up hourly bus loads from sector prototype profiles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from ..exceptions import ValidationError
from ..grid import Bus, GeoPoint, great_circle_distance

SECTORS = ("residential", "commercial", "industrial")


@dataclass(frozen=True)
class PrototypeProfile:
    sector: str
    location: GeoPoint
    hourly_values: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise ValidationError(f"unknown sector {self.sector!r}")
        values = np.asarray(self.hourly_values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError(f"prototype {self.name or self.sector}: empty profile")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ValidationError(f"prototype {self.name or self.sector}: values must be finite and >= 0")
        object.__setattr__(self, "hourly_values", values)


@dataclass(frozen=True)
class WeightFit:
    """Result of :func:`fit_bus_weights` with its residual report."""

    weights: np.ndarray
    peak_error: float          # relative error of the composite peak
    share_error: float         # max abs deviation of energy shares from the RCI ratio
    within_tolerance: bool


@dataclass(frozen=True)
class HourlyBusLoad:
    bus_id: int
    hourly_mw: np.ndarray
    sector_split: np.ndarray   # (H, 3) residential, commercial, industrial MW


def nearest_prototypes(bus: Bus, prototypes) -> tuple:
    """Geographically closest prototype of each sector (first wins ties)."""
    chosen = []
    for sector in SECTORS:
        candidates = [p for p in prototypes if p.sector == sector]
        if not candidates:
            raise ValidationError(f"no {sector} prototype profiles available")
        chosen.append(min(candidates, key=lambda p: great_circle_distance(bus.location, p.location)))
    return tuple(chosen)


def fit_bus_weights(bus: Bus, candidates, peak_tol=1e-6, share_tol=1e-6, max_iter=20) -> WeightFit:
    """Nonnegative sector weights matching the bus peak and its RCI energy shares.

    Solves a nonnegative least-squares system whose rows ask that each
    weighted sector's share of total energy equal the RCI ratio and that the
    weighted sum equal the bus peak at its peak hour. The peak hour is
    re-evaluated from the current solution until it stops moving.
    """
    if not bus.peak_load_mw > 0:
        raise ValidationError(f"bus {bus.id}: peak load must be positive to fit weights")
    profiles = np.vstack([np.asarray(c.hourly_values, dtype=float) for c in candidates])
    if profiles.shape[0] != 3:
        raise ValidationError("exactly one candidate per sector is required")
    ratio = np.asarray(bus.rci_ratio)
    energy = profiles.sum(axis=1)
    peak = bus.peak_load_mw
    scale = peak * profiles.shape[1]

    # share rows: w_c E_c - r_c * sum_j w_j E_j = 0
    share_rows = (np.diag(energy) - np.outer(ratio, energy)) / scale
    weights = np.where(profiles.max(axis=1) > 0, ratio * peak / np.maximum(profiles.max(axis=1), 1e-300), 0.0)
    t_star = int(np.argmax(weights @ profiles))
    for _ in range(max_iter):
        A = np.vstack([share_rows, profiles[:, t_star] / peak])
        b = np.array([0.0, 0.0, 0.0, 1.0])
        weights, _ = nnls(A, b)
        new_t = int(np.argmax(weights @ profiles))
        if new_t == t_star:
            break
        t_star = new_t

    composite = weights @ profiles
    peak_error = abs(composite.max() - peak) / peak
    total = (weights * energy).sum()
    shares = weights * energy / total if total > 0 else np.zeros(3)
    share_error = float(np.abs(shares - ratio).max())
    return WeightFit(weights=weights, peak_error=float(peak_error), share_error=share_error,
                     within_tolerance=bool(peak_error <= peak_tol and share_error <= share_tol))


def build_hourly_load(bus: Bus, prototypes, **fit_kwargs) -> tuple:
    """Hourly bus load from its nearest prototypes. Returns ``(HourlyBusLoad, WeightFit)``."""
    candidates = nearest_prototypes(bus, prototypes)
    fit = fit_bus_weights(bus, candidates, **fit_kwargs)
    split = np.column_stack([w * c.hourly_values for w, c in zip(fit.weights, candidates)])
    return HourlyBusLoad(bus_id=bus.id, hourly_mw=split.sum(axis=1), sector_split=split), fit
