"""Spatially correlated sub-interval wind speed synthesis.

Independent random-walk variations are drawn at the points of a coarse
reference lattice and blended into each farm with correlation-curve
weights, then superimposed on the line between consecutive 5-minute
speeds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import CoverageError, ValidationError
from ..grid import EARTH_RADIUS_KM, CorrelationCurve, GeoPoint, pairwise_distances
from .variation import SigmaDistribution, linear_baseline

LATTICE_SPACING_KM = 600.0


@dataclass(frozen=True)
class ReferenceLattice:
    points: tuple
    farm_ids: tuple
    weights: np.ndarray  # (n_farms, n_points), correlation of farm e with point n
    spacing_km: float = LATTICE_SPACING_KM

    @property
    def omega(self) -> np.ndarray:
        return self.weights.sum(axis=1)


def _lattice_points(lats, lons, spacing_km):
    dlat = math.degrees(spacing_km / EARTH_RADIUS_KM)
    lat0 = max(-90.0, min(lats) - dlat)
    n_rows = int(math.ceil((min(90.0, max(lats) + dlat) - lat0) / dlat - 1e-12)) + 1
    points = []
    for i in range(n_rows):
        lat = min(90.0, lat0 + i * dlat)
        coslat = max(math.cos(math.radians(lat)), 1e-6)
        dlon = min(360.0, math.degrees(spacing_km / (EARTH_RADIUS_KM * coslat)))
        lon0 = min(lons) - dlon
        lon_end = max(lons) + dlon
        n_cols = int(math.ceil((lon_end - lon0) / dlon - 1e-12)) + 1
        for j in range(n_cols):
            lon = lon0 + j * dlon
            lon = (lon + 180.0) % 360.0 - 180.0
            points.append(GeoPoint(lat, lon))
    return points


def build_reference_lattice(farms, curve: CorrelationCurve | None = None,
                            spacing_km: float = LATTICE_SPACING_KM) -> ReferenceLattice:
    """Lay a lattice over the farms' bounding box and weight farms to points.

    The lattice starts one cell south-west of the bounding box; rows are
    ``spacing_km`` apart along meridians and points within a row are
    ``spacing_km`` apart along that row's parallel. Weights are the
    correlation-curve value at the farm-to-point distance.
    """
    farms = list(farms)
    if not farms:
        raise ValidationError("need at least one wind farm to build a reference lattice")
    curve = curve or CorrelationCurve.default()
    locs = [f.location for f in farms]
    points = _lattice_points([p.latitude for p in locs], [p.longitude for p in locs], spacing_km)
    dist = pairwise_distances(locs, points)
    weights = np.vectorize(lambda d: curve(d))(dist) if dist.size else dist
    lattice = ReferenceLattice(points=tuple(points), farm_ids=tuple(f.id for f in farms),
                               weights=np.asarray(weights, dtype=float), spacing_km=spacing_km)
    bad = [fid for fid, om in zip(lattice.farm_ids, lattice.omega) if not om > 0]
    if bad:
        raise CoverageError(f"wind farms {bad} are not correlated with any reference point")
    return lattice


def point_streams(seed, n_points):
    """One independent generator per reference point, split from ``seed``."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_points)]


def synthesize_reference_variations(lattice: ReferenceLattice, psi: SigmaDistribution, n_steps: int,
                                    seed=None, n_windows: int = 1, streams=None) -> np.ndarray:
    """Random-walk variations at every lattice point.

    Returns an array of shape ``(n_windows, n_points, n_steps)``. For each
    point and window a sigma is drawn from ``psi``, increments 2..n_steps are
    ``N(0, sigma)`` and the first increment is zero; the walk is their
    cumulative sum.
    """
    if n_steps < 2:
        raise ValidationError("n_steps must be at least 2")
    n_points = len(lattice.points)
    if streams is None:
        streams = point_streams(seed, n_points)
    out = np.zeros((n_windows, n_points, n_steps))
    for n, rng in enumerate(streams):
        for w in range(n_windows):
            sigma = psi.draw(rng)
            inc = np.zeros(n_steps)
            inc[1:] = rng.normal(0.0, sigma, n_steps - 1)
            out[w, n] = np.cumsum(inc)
    return out


def farm_variations(lattice: ReferenceLattice, reference: np.ndarray) -> np.ndarray:
    """Correlation-weighted average of point variations for each farm.

    ``reference`` has points on its second-to-last axis; the result replaces
    that axis with farms.
    """
    omega = lattice.omega
    if np.any(omega <= 0):
        raise CoverageError("every farm needs a positive total weight")
    blend = lattice.weights / omega[:, None]
    return np.einsum("en,...ns->...es", blend, reference)


def combine_speed(v_start: float, v_end: float, variation, n_steps: int) -> np.ndarray:
    """Superimpose a variation series on the line between two 5-minute speeds.

    Endpoints are pinned to ``v_start`` and ``v_end``; negative interior
    speeds are clamped to zero.
    """
    if n_steps < 2:
        raise ValidationError("n_steps must be at least 2")
    variation = np.asarray(variation, dtype=float)
    speeds = linear_baseline(float(v_start), float(v_end), n_steps) + variation
    speeds[0] = v_start
    speeds[-1] = v_end
    np.clip(speeds, 0.0, None, out=speeds)
    return speeds


def synthesize_wind_speeds(speeds_5min, lattice: ReferenceLattice, psi: SigmaDistribution,
                           n_steps: int, seed) -> np.ndarray:
    """Fine-resolution speeds for consecutive 5-minute windows.

    ``speeds_5min`` has shape ``(T + 1, n_farms)``. Windows share their
    endpoints, so the result has ``T * (n_steps - 1) + 1`` rows.
    """
    v = np.asarray(speeds_5min, dtype=float)
    n_windows = v.shape[0] - 1
    if n_windows < 1:
        raise ValidationError("need at least two 5-minute samples")
    ref = synthesize_reference_variations(lattice, psi, n_steps, seed=seed, n_windows=n_windows)
    var = farm_variations(lattice, ref)  # (windows, farms, steps)
    out = np.empty((n_windows * (n_steps - 1) + 1, v.shape[1]))
    for w in range(n_windows):
        rows = slice(w * (n_steps - 1), (w + 1) * (n_steps - 1) + 1)
        for e in range(v.shape[1]):
            out[rows, e] = combine_speed(v[w, e], v[w + 1, e], var[w, e], n_steps)
    return out


class CorrelatedWindSynthesizer(TransformerMixin, BaseEstimator):
    """Upsample 5-minute farm wind speeds with spatially correlated variations.

    ``fit(farms, sigma_distribution)`` builds the reference lattice;
    ``transform(X)`` maps a ``(T + 1, n_farms)`` array of 5-minute speeds to
    ``(T * (n_steps - 1) + 1, n_farms)`` fine-resolution speeds. The output
    depends only on ``random_state``, so repeated calls are identical.
    """

    def __init__(self, curve=None, n_steps=21, spacing_km=LATTICE_SPACING_KM, random_state=0):
        self.curve = curve
        self.n_steps = n_steps
        self.spacing_km = spacing_km
        self.random_state = random_state

    def fit(self, farms, sigma_distribution):
        self.lattice_ = build_reference_lattice(farms, self.curve, self.spacing_km)
        self.sigma_distribution_ = sigma_distribution
        self.n_farms_ = len(self.lattice_.farm_ids)
        return self

    def transform(self, X):
        check_is_fitted(self, "lattice_")
        X = check_array(X, ensure_min_samples=2)
        if X.shape[1] != self.n_farms_:
            raise ValidationError(f"expected {self.n_farms_} farm columns, got {X.shape[1]}")
        if np.any(X < 0):
            raise ValidationError("wind speeds must be nonnegative")
        return synthesize_wind_speeds(X, self.lattice_, self.sigma_distribution_, self.n_steps,
                                      self.random_state)
