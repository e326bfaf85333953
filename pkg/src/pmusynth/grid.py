"""Static grid case: geography, buses, zones, generators, wind farms, lines.

The case file is a YAML document (``format_version: 1``); see
``docs/case_schema.md`` for the field reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .exceptions import ParseError, ValidationError
from .wind.power import TurbineCurve

EARTH_RADIUS_KM = 6371.0
FORMAT_VERSION = 1
RCI_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GeoPoint:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0):
            raise ValidationError(f"latitude {self.latitude} outside [-90, 90]")
        if not (-180.0 <= self.longitude <= 180.0):
            raise ValidationError(f"longitude {self.longitude} outside [-180, 180]")


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Haversine distance in km on a sphere of radius 6371 km."""
    phi1, phi2 = math.radians(a.latitude), math.radians(b.latitude)
    dphi = phi2 - phi1
    dlam = math.radians(b.longitude - a.longitude)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    # rounding can push h a hair above 1 for antipodes
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(min(1.0, h)))


def pairwise_distances(points_a: Sequence[GeoPoint], points_b: Sequence[GeoPoint]) -> np.ndarray:
    """Vectorized haversine distance matrix, shape (len(a), len(b)), km."""
    lat_a = np.radians([p.latitude for p in points_a])[:, None]
    lon_a = np.radians([p.longitude for p in points_a])[:, None]
    lat_b = np.radians([p.latitude for p in points_b])[None, :]
    lon_b = np.radians([p.longitude for p in points_b])[None, :]
    h = np.sin((lat_b - lat_a) / 2) ** 2 + np.cos(lat_a) * np.cos(lat_b) * np.sin((lon_b - lon_a) / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.minimum(1.0, h)))


@dataclass(frozen=True)
class CorrelationCurve:
    """Piecewise polynomial correlation-vs-distance curve.

    ``segments`` holds ``((lo_km, hi_km), coeffs)`` with coefficients in
    ascending powers of distance. Beyond ``max_distance_km`` the correlation
    is zero.
    """

    segments: tuple
    max_distance_km: float

    def __post_init__(self):
        segs = tuple((tuple(float(v) for v in bounds), tuple(float(c) for c in coeffs))
                     for bounds, coeffs in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValidationError("correlation curve needs at least one segment")
        if segs[0][0][0] != 0.0:
            raise ValidationError("first correlation segment must start at 0 km")
        for (b0, c0), (b1, c1) in zip(segs, segs[1:]):
            if b0[1] != b1[0]:
                raise ValidationError(f"correlation segments not contiguous at {b0[1]} km")
            if abs(_polyval(c0, b0[1]) - _polyval(c1, b1[0])) > 1e-6:
                raise ValidationError(f"correlation curve discontinuous at {b0[1]} km")
        if abs(_polyval(segs[0][1], 0.0) - 1.0) > 1e-9:
            raise ValidationError("correlation curve must satisfy rho(0) = 1")
        # check the raw polynomials; evaluation clamps, which would hide a rise above 1
        grid = np.linspace(0.0, self.max_distance_km, 2001)[:-1]
        raw = np.array([next(_polyval(c, d) for (lo, hi), c in segs if lo <= d < hi)
                        if any(lo <= d < hi for (lo, hi), _ in segs) else 0.0 for d in grid])
        if np.any(np.diff(raw) > 1e-12) or np.any(raw > 1.0 + 1e-12):
            raise ValidationError("correlation curve must be non-increasing from 1")

    @classmethod
    def default(cls) -> "CorrelationCurve":
        # (1 - d/600)^2: rho(0)=1, rho(600)=0 with zero slope, monotone between
        return cls(segments=(((0.0, 600.0), (1.0, -1.0 / 300.0, 1.0 / 360000.0)),
                             ((600.0, math.inf), (0.0,))),
                   max_distance_km=600.0)

    def __call__(self, d):
        return correlation(self, d)


def _polyval(coeffs, x):
    result = 0.0
    for c in reversed(coeffs):
        result = result * x + c
    return result


def correlation(curve: CorrelationCurve, d: float) -> float:
    """Evaluate the correlation curve at distance ``d`` km, clamped to [0, 1]."""
    if d < 0:
        raise ValidationError(f"distance must be nonnegative, got {d}")
    if d >= curve.max_distance_km:
        return 0.0
    for (lo, hi), coeffs in curve.segments:
        if lo <= d < hi:
            return min(1.0, max(0.0, _polyval(coeffs, d)))
    return 0.0


@dataclass(frozen=True)
class Bus:
    id: int
    location: GeoPoint
    zone_id: int
    peak_load_mw: float
    rci_ratio: tuple
    power_factor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "rci_ratio", tuple(float(r) for r in self.rci_ratio))
        if self.peak_load_mw < 0:
            raise ValidationError(f"bus {self.id}: negative peak load {self.peak_load_mw}")
        if len(self.rci_ratio) != 3 or any(r < 0 for r in self.rci_ratio):
            raise ValidationError(f"bus {self.id}: rci_ratio must be three nonnegative fractions")
        if abs(sum(self.rci_ratio) - 1.0) > RCI_TOLERANCE:
            raise ValidationError(
                f"bus {self.id}: rci_ratio sums to {sum(self.rci_ratio):.6g}, expected 1")


@dataclass(frozen=True)
class Zone:
    id: int
    centroid: GeoPoint
    member_bus_ids: tuple


@dataclass(frozen=True)
class Generator:
    id: int
    bus_id: int
    p_min_mw: float
    p_max_mw: float
    participation: float = 1.0
    vm_setpoint_pu: float = 1.0


@dataclass(frozen=True)
class WindFarm:
    id: int
    bus_id: int
    location: GeoPoint
    rated_mw: float
    turbine_curve_id: str

    def __post_init__(self):
        if not self.rated_mw > 0:
            raise ValidationError(f"wind farm {self.id}: rated_mw must be positive")


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r_pu: float
    x_pu: float
    b_pu: float = 0.0


@dataclass(frozen=True)
class GridCase:
    name: str
    base_mva: float
    slack_bus_id: int
    buses: tuple
    zones: tuple
    generators: tuple
    wind_farms: tuple
    lines: tuple
    turbine_curves: dict = field(hash=False)
    correlation_curve: CorrelationCurve

    @property
    def bus_index(self) -> dict:
        return {b.id: i for i, b in enumerate(self.buses)}

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.bus_index[bus_id]]

    def zone_of(self, bus_id: int) -> Zone:
        zid = self.bus(bus_id).zone_id
        return next(z for z in self.zones if z.id == zid)


def _zone_centroid(points):
    # arithmetic mean of member coordinates
    return GeoPoint(float(np.mean([p.latitude for p in points])),
                    float(np.mean([p.longitude for p in points])))


def build_grid_case(doc: dict) -> GridCase:
    """Cross-link and validate a parsed case document."""
    if not isinstance(doc, dict):
        raise ParseError("case file must be a mapping at the top level")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(f"unsupported or missing format_version: {doc.get('format_version')!r}")
    try:
        zone_ids = [int(z["id"]) for z in doc["zones"]]
        buses = tuple(
            Bus(id=int(b["id"]), location=GeoPoint(float(b["lat"]), float(b["lon"])),
                zone_id=int(b["zone_id"]), peak_load_mw=float(b["peak_load_mw"]),
                rci_ratio=tuple(b["rci_ratio"]),
                power_factor=None if b.get("power_factor") is None else float(b["power_factor"]))
            for b in doc["buses"])
        generators = tuple(
            Generator(id=int(g["id"]), bus_id=int(g["bus_id"]), p_min_mw=float(g["p_min_mw"]),
                      p_max_mw=float(g["p_max_mw"]),
                      participation=float(g.get("participation", 1.0)),
                      vm_setpoint_pu=float(g.get("vm_setpoint_pu", 1.0)))
            for g in doc.get("generators", []))
        farms = tuple(
            WindFarm(id=int(w["id"]), bus_id=int(w["bus_id"]),
                     location=GeoPoint(float(w["lat"]), float(w["lon"])),
                     rated_mw=float(w["rated_mw"]), turbine_curve_id=str(w["turbine_curve_id"]))
            for w in doc.get("wind_farms", []))
        lines = tuple(
            Line(from_bus=int(ln["from_bus"]), to_bus=int(ln["to_bus"]), r_pu=float(ln["r_pu"]),
                 x_pu=float(ln["x_pu"]), b_pu=float(ln.get("b_pu", 0.0)))
            for ln in doc.get("lines", []))
        curves = {str(cid): TurbineCurve(**{k: float(v) for k, v in params.items()})
                  for cid, params in (doc.get("turbine_curves") or {}).items()}
        cc = doc.get("correlation_curve")
        if cc is None:
            curve = CorrelationCurve.default()
        else:
            curve = CorrelationCurve(
                segments=tuple(((float(s["from_km"]), float(s["to_km"])), tuple(s["coeffs"]))
                               for s in cc["segments"]),
                max_distance_km=float(cc["max_distance_km"]))
        base_mva = float(doc.get("base_mva", 100.0))
        slack = int(doc["slack_bus_id"])
        name = str(doc.get("name", "case"))
    except KeyError as exc:
        raise ParseError(f"case file missing required field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(f"malformed case entry: {exc}") from exc

    _check_unique("zone", zone_ids)
    _check_unique("bus", [b.id for b in buses])
    _check_unique("generator", [g.id for g in generators])
    _check_unique("wind farm", [w.id for w in farms])
    bus_ids = {b.id for b in buses}
    for b in buses:
        if b.zone_id not in zone_ids:
            raise ValidationError(f"bus {b.id}: references unknown zone {b.zone_id}")
    for g in generators:
        if g.bus_id not in bus_ids:
            raise ValidationError(f"generator {g.id}: references unknown bus {g.bus_id}")
        if g.p_min_mw > g.p_max_mw:
            raise ValidationError(f"generator {g.id}: p_min_mw exceeds p_max_mw")
    for w in farms:
        if w.bus_id not in bus_ids:
            raise ValidationError(f"wind farm {w.id}: references unknown bus {w.bus_id}")
        if w.turbine_curve_id not in curves:
            raise ValidationError(f"wind farm {w.id}: unknown turbine curve {w.turbine_curve_id!r}")
    for ln in lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in bus_ids:
                raise ValidationError(f"line {ln.from_bus}-{ln.to_bus}: unknown bus {end}")
    if slack not in bus_ids:
        raise ValidationError(f"slack bus {slack} does not exist")

    zones = []
    for zid in zone_ids:
        members = tuple(b.id for b in buses if b.zone_id == zid)
        if not members:
            raise ValidationError(f"zone {zid}: has no member buses")
        zones.append(Zone(id=zid, centroid=_zone_centroid([b.location for b in buses if b.zone_id == zid]),
                          member_bus_ids=members))
    if not zones:
        raise ValidationError("case must define at least one zone")

    return GridCase(name=name, base_mva=base_mva, slack_bus_id=slack, buses=buses,
                    zones=tuple(zones), generators=generators, wind_farms=farms, lines=lines,
                    turbine_curves=curves, correlation_curve=curve)


def _check_unique(kind, ids):
    seen = set()
    for i in ids:
        if i in seen:
            raise ValidationError(f"duplicate {kind} id {i}")
        seen.add(i)


def load_grid_case(path) -> GridCase:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise ParseError(f"{path}: empty case file")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return build_grid_case(doc)


def grid_case_to_dict(case: GridCase) -> dict:
    def curve_doc(curve):
        return {"max_distance_km": curve.max_distance_km,
                "segments": [{"from_km": lo, "to_km": hi, "coeffs": list(c)}
                             for (lo, hi), c in curve.segments]}

    return {
        "format_version": FORMAT_VERSION,
        "name": case.name,
        "base_mva": case.base_mva,
        "slack_bus_id": case.slack_bus_id,
        "zones": [{"id": z.id} for z in case.zones],
        "buses": [{"id": b.id, "lat": b.location.latitude, "lon": b.location.longitude,
                   "zone_id": b.zone_id, "peak_load_mw": b.peak_load_mw,
                   "rci_ratio": list(b.rci_ratio), "power_factor": b.power_factor}
                  for b in case.buses],
        "generators": [{"id": g.id, "bus_id": g.bus_id, "p_min_mw": g.p_min_mw,
                        "p_max_mw": g.p_max_mw, "participation": g.participation,
                        "vm_setpoint_pu": g.vm_setpoint_pu} for g in case.generators],
        "wind_farms": [{"id": w.id, "bus_id": w.bus_id, "lat": w.location.latitude,
                        "lon": w.location.longitude, "rated_mw": w.rated_mw,
                        "turbine_curve_id": w.turbine_curve_id} for w in case.wind_farms],
        "lines": [{"from_bus": ln.from_bus, "to_bus": ln.to_bus, "r_pu": ln.r_pu,
                   "x_pu": ln.x_pu, "b_pu": ln.b_pu} for ln in case.lines],
        "turbine_curves": {cid: tc.to_dict() for cid, tc in case.turbine_curves.items()},
        "correlation_curve": curve_doc(case.correlation_curve),
    }


def save_grid_case(case: GridCase, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(grid_case_to_dict(case), fh, sort_keys=False)
