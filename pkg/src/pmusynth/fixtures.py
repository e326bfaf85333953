"""Synthetic stand-ins for the external datasets.

``make_fixtures`` writes a small self-consistent workspace: the bundled
40-bus case, prototype building profiles, a minutely load history for the
simulated hour, 5-minute farm wind speeds, a high-resolution wind history
and a config file pointing at all of them.
"""
from __future__ import annotations

import csv
import math
from datetime import date, datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .grid import load_grid_case
from .io import format_utc

HOURS_PER_YEAR = 8760
DEFAULT_START = datetime(2016, 7, 15, 17, 0, tzinfo=timezone.utc)

ZONE_CENTERS = [
    (35.2, -101.8), (33.6, -101.9), (31.9, -102.1), (32.8, -96.8),
    (31.5, -97.1), (30.3, -97.7), (29.8, -95.4), (27.8, -97.4),
]
ZONE_TIES = [(1, 2), (2, 3), (2, 4), (3, 5), (4, 5), (5, 6), (6, 7), (4, 7), (6, 8), (7, 8)]
BUS_OFFSETS = [(0.0, 0.0), (0.25, 0.2), (-0.2, 0.3), (0.3, -0.25), (-0.25, -0.3)]


def mini_case_dict() -> dict:
    """The bundled 8-zone, 40-bus, 6-farm case as a document."""
    rng = np.random.default_rng(2019)
    buses, lines, gens = [], [], []
    for z, (lat, lon) in enumerate(ZONE_CENTERS, start=1):
        for k, (dlat, dlon) in enumerate(BUS_OFFSETS):
            bid = (z - 1) * 5 + k + 1
            rci = rng.dirichlet([3.0, 2.0, 1.0])
            rci = [round(float(v), 3) for v in rci]
            rci[2] = round(1.0 - rci[0] - rci[1], 3)
            buses.append({"id": bid, "lat": round(lat + dlat, 4), "lon": round(lon + dlon, 4),
                          "zone_id": z, "peak_load_mw": float(round(rng.uniform(30.0, 90.0), 1)),
                          "rci_ratio": rci, "power_factor": None})
        hub = (z - 1) * 5 + 1
        for a, b in [(0, 1), (1, 2), (2, 3), (3, 4), (0, 2), (0, 4)]:
            lines.append({"from_bus": hub + a, "to_bus": hub + b, "r_pu": 0.004, "x_pu": 0.03,
                          "b_pu": 0.01})
        gens.append({"id": z, "bus_id": hub, "p_min_mw": 0.0, "p_max_mw": 900.0,
                     "participation": 1.0, "vm_setpoint_pu": 1.02})
    for za, zb in ZONE_TIES:
        for k in (0, 1):
            lines.append({"from_bus": (za - 1) * 5 + 1 + k, "to_bus": (zb - 1) * 5 + 1 + k,
                          "r_pu": 0.006, "x_pu": 0.05, "b_pu": 0.04})
    farms = []
    farm_sites = [(2, 36.0, -101.2), (3, 33.2, -101.0), (4, 31.0, -102.8), (7, 30.9, -100.5),
                  (22, 33.4, -98.6), (39, 27.3, -97.6)]
    for i, (bus_id, lat, lon) in enumerate(farm_sites, start=1):
        farms.append({"id": i, "bus_id": bus_id, "lat": lat, "lon": lon,
                      "rated_mw": 150.0 if i % 2 else 200.0, "turbine_curve_id": "generic"})
    return {
        "format_version": 1,
        "name": "mini-texas-40",
        "base_mva": 100.0,
        "slack_bus_id": 31,
        "zones": [{"id": z} for z in range(1, 9)],
        "buses": buses,
        "generators": gens,
        "wind_farms": farms,
        "lines": lines,
        "turbine_curves": {"generic": {"v_cutin": 3.0, "v_mid": 8.0, "v_rated": 12.0,
                                       "v_lim": 20.0, "v_furl": 25.0, "beta": 0.95, "alpha3": 2.0}},
        "correlation_curve": {"max_distance_km": 600.0, "segments": [
            {"from_km": 0.0, "to_km": 600.0, "coeffs": [1.0, -1.0 / 300.0, 1.0 / 360000.0]},
            {"from_km": 600.0, "to_km": math.inf, "coeffs": [0.0]},
        ]},
    }


def mini_case_path() -> Path:
    return Path(str(resources.files("pmusynth") / "data" / "mini_case.yaml"))


def load_mini_case():
    return load_grid_case(mini_case_path())


def prototype_profiles(rng, n_per_sector=3, hours=HOURS_PER_YEAR):
    """Daily/seasonal shaped sector profiles scattered over the case footprint."""
    t = np.arange(hours)
    hod = t % 24
    doy = t // 24
    summer = 1.0 + 0.35 * np.cos(2 * np.pi * (doy - 200) / 365.0)
    shapes = {
        "residential": 0.55 + 0.45 * np.exp(-((hod - 18) ** 2) / 10.0) + 0.15 * np.exp(-((hod - 7) ** 2) / 4.0),
        "commercial": 0.4 + 0.6 * np.sqrt(np.clip(np.sin(np.pi * (hod - 8) / 10.0), 0.0, None) * ((hod >= 8) & (hod < 18))),
        "industrial": 0.85 + 0.1 * ((hod >= 6) & (hod < 22)),
    }
    out = []
    for sector, shape in shapes.items():
        for i in range(n_per_sector):
            lat = float(rng.uniform(27.0, 36.0))
            lon = float(rng.uniform(-103.0, -95.0))
            scale = float(rng.uniform(0.5, 3.0))
            seasonal = summer if sector != "industrial" else 1.0
            noise = 1.0 + 0.03 * rng.standard_normal(hours)
            values = np.clip(scale * shape * seasonal * noise, 0.0, None)
            out.append((f"{sector}_{i}", sector, lat, lon, values))
    return out


PATTERN_SHAPES = (
    lambda m: 0.03 * np.sin(np.pi * m),                   # mid-hour bump
    lambda m: -0.03 * np.sin(np.pi * m),                  # mid-hour dip
    lambda m: 0.02 * np.sin(2 * np.pi * m),               # early rise, late fall
    lambda m: 0.015 * np.sin(3 * np.pi * m),              # ripple
)


def load_history(rng, start: datetime, n_days=40, minutes=61, off_season_days=6):
    """Minutely loads for the simulated hour-of-day on many days.

    Most days fall in the summer season window; a few winter days are mixed
    in so the season filter has something to reject.
    """
    rows = []
    m = np.linspace(0.0, 1.0, minutes)
    summer_days = [date(start.year, 6, 1) + timedelta(days=int(d))
                   for d in np.sort(rng.choice(92, size=n_days, replace=False))]
    winter_days = [date(start.year, 1, 5) + timedelta(days=i) for i in range(off_season_days)]
    for day in summer_days + winter_days:
        base0 = rng.uniform(9000.0, 12000.0)
        base1 = base0 * rng.uniform(0.97, 1.05)
        shape = PATTERN_SHAPES[int(rng.integers(len(PATTERN_SHAPES)))](m)
        line = base0 + (base1 - base0) * m
        values = line * (1.0 + shape + 0.002 * rng.standard_normal(minutes))
        values[0], values[-1] = base0, base1
        rows.extend((day.isoformat(), i, float(v)) for i, v in enumerate(values))
    rows.sort()
    return rows


def wind_history(rng, start: datetime, seconds=7200):
    """1-Hz wind speed history: mean-reverting process with varying volatility."""
    v = np.empty(seconds + 1)
    v[0] = 9.0
    vol = 0.15
    for i in range(1, seconds + 1):
        if i % 600 == 0:
            vol = float(rng.uniform(0.05, 0.3))
        v[i] = max(0.0, v[i - 1] + 0.002 * (9.0 - v[i - 1]) + vol * rng.standard_normal())
    t0 = start - timedelta(days=30)
    return [(format_utc(t0 + timedelta(seconds=i)), float(x)) for i, x in enumerate(v)]


def wind_5min(rng, case, start: datetime, hours=2):
    """5-minute speeds for each farm from one hour before ``start`` to ``hours`` after."""
    n = hours * 12 + 12 + 1
    t0 = start - timedelta(hours=1)
    common = 9.0 + np.cumsum(0.3 * rng.standard_normal(n))
    rows = []
    for farm in case.wind_farms:
        own = common + 1.5 * np.sin(farm.location.longitude) + np.cumsum(0.2 * rng.standard_normal(n))
        own = np.clip(own, 0.5, 24.0)
        rows.extend((farm.id, format_utc(t0 + timedelta(minutes=5 * i)), float(round(v, 4)))
                    for i, v in enumerate(own))
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def make_fixtures(out_dir, seed=2019, start: datetime = DEFAULT_START) -> Path:
    """Write the fixture workspace into ``out_dir``; returns the config path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    case = load_mini_case()
    (out / "case.yaml").write_text(mini_case_path().read_text(encoding="utf-8"), encoding="utf-8")

    proto_dir = out / "prototypes"
    proto_dir.mkdir(exist_ok=True)
    for name, sector, lat, lon, values in prototype_profiles(rng):
        with open(proto_dir / f"{name}.csv", "w", encoding="utf-8") as fh:
            fh.write("sector,lat,lon\n")
            fh.write(f"{sector},{float(lat)!r},{float(lon)!r}\n")
            fh.write("".join(f"{float(v)!r}\n" for v in values))

    _write_csv(out / "load_history.csv", ("date", "minute_of_hour", "load_mw"), load_history(rng, start))
    _write_csv(out / "wind_history.csv", ("timestamp_utc", "speed_mps"), wind_history(rng, start))
    _write_csv(out / "wind_5min.csv", ("farm_id", "timestamp_utc", "speed_mps"), wind_5min(rng, case, start))

    config = {
        "seed": 20190101,
        "paths": {"case": "case.yaml", "load_history": "load_history.csv", "prototypes": "prototypes",
                  "wind_5min": "wind_5min.csv", "wind_history": "wind_history.csv", "output_dir": "out"},
        "simulation": {"start_utc": format_utc(start)},
        "demand": {"K": 4, "season_days": [[152, 244]]},
        "wind": {"step_s": 15},
        "emit": {"duration_minutes": 10, "step_s": 15, "noise_sigma": 0.01,
                 "export_channels": ["vm:bus:1", "vm:bus:31", "p:gen:7"]},
    }
    cfg_path = out / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return cfg_path
