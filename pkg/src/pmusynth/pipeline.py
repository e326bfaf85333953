"""Stage commands: demand, wind, compose, emit and the full chain.

Each command is a pure function of (config, input files, seed) and writes
its outputs plus a ``manifest.json`` into its own stage directory under the
configured output directory. ``cmd_emit`` reads the demand and wind stage
outputs from disk rather than recomputing them.
"""
from __future__ import annotations

import hashlib
import json
import logging
import shutil
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .composition import CompositionTable, classify_period, compose, write_compositions
from .config import PipelineConfig
from .demand.assignment import assign_patterns
from .demand.hourly import HourlyBusLoad, build_hourly_load
from .demand.patterns import extract_patterns
from .demand.rescale import add_forecast_noise, rescale_to_minutes
from .demand.scaling import scale_day_hour
from .emit.stream import emit_frames, export_csv, upsample_frames
from .emit.timeline import SeriesTable, Timeline, build_timeline_inputs
from .emit.tsb import write_tsb
from .exceptions import CoverageError, PmuSynthError, ValidationError
from .grid import load_grid_case
from .io import (format_utc, read_load_history, read_prototypes, read_table, read_wind_5min,
                 read_wind_history, write_table)
from .wind.power import farm_power_series
from .wind.synth import build_reference_lattice, synthesize_wind_speeds
from .wind.variation import estimate_sigma_distribution

log = logging.getLogger(__name__)


class StageError(PmuSynthError):
    """Wraps a failure with the name of the stage it happened in."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_tree(path) -> str:
    path = Path(path)
    if path.is_file():
        return sha256_file(path)
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(f.relative_to(path).as_posix().encode())
        h.update(sha256_file(f).encode())
    return h.hexdigest()


def write_manifest(stage_dir: Path, command: str, cfg: PipelineConfig, inputs: dict, extra=None):
    outputs = {p.relative_to(stage_dir).as_posix(): sha256_file(p)
               for p in sorted(stage_dir.rglob("*")) if p.is_file() and p.name != "manifest.json"}
    doc = {"command": command, "version": __version__, "seed": cfg.seed,
           "start_utc": format_utc(cfg.start_utc),
           "inputs": {k: sha256_tree(v) for k, v in sorted(inputs.items())},
           "outputs": outputs}
    doc.update(extra or {})
    (stage_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                             encoding="utf-8")
    return doc


def _stage(name):
    def wrap(fn):
        def run(cfg, *args, **kwargs):
            try:
                return fn(cfg, *args, **kwargs)
            except ValidationError:
                raise
            except PmuSynthError as exc:
                raise StageError(f"[{name}] {exc}") from exc
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


def hour_of_year(start: datetime) -> int:
    jan1 = datetime(start.year, 1, 1, tzinfo=timezone.utc)
    return int((start - jan1).total_seconds() // 3600)


def in_season(day, windows) -> bool:
    doy = day.timetuple().tm_yday
    return any(int(lo) <= doy <= int(hi) for lo, hi in windows)


def _stage_dir(cfg, name) -> Path:
    d = cfg.output_dir / name
    if d.exists():
        shutil.rmtree(d)
    d.mkdir(parents=True)
    return d


@_stage("demand")
def cmd_demand(cfg: PipelineConfig) -> dict:
    """Hourly bus loads, minutely patterns, zone assignment, minutely bus loads."""
    cfg.require("case", "load_history", "prototypes")
    dcfg = cfg.demand
    case = load_grid_case(cfg.paths["case"])
    prototypes = read_prototypes(cfg.paths["prototypes"])
    out = _stage_dir(cfg, "demand")
    h = hour_of_year(cfg.start_utc)

    hourly, fits = {}, []
    for bus in case.buses:
        if bus.peak_load_mw == 0:
            n = prototypes[0].hourly_values.size
            hourly[bus.id] = HourlyBusLoad(bus.id, np.zeros(n), np.zeros((n, 3)))
            fits.append((bus.id, 0.0, 0.0, 0.0, 0.0, 0.0, 1))
            continue
        load, fit = build_hourly_load(bus, prototypes, peak_tol=dcfg["peak_tolerance"],
                                      share_tol=dcfg["share_tolerance"])
        if not fit.within_tolerance:
            log.warning("bus %s: weight fit above tolerance (peak %.2e, share %.2e)",
                        bus.id, fit.peak_error, fit.share_error)
        hourly[bus.id] = load
        fits.append((bus.id, *map(float, fit.weights), fit.peak_error, fit.share_error,
                     int(fit.within_tolerance)))
    write_table(out / "weights.csv", ("bus_id", "w_res", "w_com", "w_ind", "peak_error",
                                      "share_error", "within_tolerance"), fits)
    write_table(out / "hourly_load.csv", ("hour",) + tuple(f"bus_{b.id}" for b in case.buses),
                ([i] + [float(hourly[b.id].hourly_mw[i]) for b in case.buses]
                 for i in range(h, min(h + 2, hourly[case.buses[0].id].hourly_mw.size))))

    history = read_load_history(cfg.paths["load_history"])
    days = [d for d in history if in_season(d, dcfg["season_days"])]
    if not days:
        raise ValidationError("no historical days fall inside the configured season windows")
    samples = np.vstack([scale_day_hour(history[d]) for d in days])
    lib = extract_patterns(samples, int(dcfg["K"]), seed=cfg.stage_seed("kmeans"),
                           n_init=int(dcfg["kmeans_n_init"]), max_iter=int(dcfg["kmeans_max_iter"]),
                           tol=dcfg["kmeans_tol"])
    (out / "patterns.json").write_text(json.dumps(lib.to_dict(), indent=2) + "\n", encoding="utf-8")

    assignment = assign_patterns(case.zones, lib, seed=cfg.stage_seed("assignment"),
                                 same_cluster=dcfg["same_cluster_distance"],
                                 exhaustive_limit=int(dcfg["exhaustive_limit"]),
                                 n_iter=int(dcfg["annealing_iterations"]))
    (out / "assignment.json").write_text(json.dumps(assignment.to_dict(), indent=2) + "\n",
                                         encoding="utf-8")

    rng = np.random.default_rng(cfg.stage_seed("forecast-noise"))
    columns = []
    for bus in case.buses:
        minutely = rescale_to_minutes(hourly[bus.id], assignment, lib, h, bus.zone_id)
        columns.append(add_forecast_noise(minutely.minute_mw, dcfg["forecast_noise_sigma"], rng))
    table = np.column_stack(columns)
    write_table(out / "minutely_load.csv", ("minute",) + tuple(f"bus_{b.id}" for b in case.buses),
                ([m] + [float(v) for v in row] for m, row in enumerate(table)))

    inputs = {"case": cfg.paths["case"], "load_history": cfg.paths["load_history"],
              "prototypes": cfg.paths["prototypes"]}
    return write_manifest(out, "demand", cfg, inputs, {
        "hour_of_year": h, "season_days_used": len(days), "K": lib.K,
        "objective_value": assignment.objective_value, "assignment_method": assignment.method,
        "probabilities": [float(p) for p in lib.probabilities]})


@_stage("wind")
def cmd_wind(cfg: PipelineConfig) -> dict:
    """Fine-resolution farm speeds and power over the simulated hour."""
    cfg.require("case", "wind_5min", "wind_history")
    wcfg = cfg.wind
    case = load_grid_case(cfg.paths["case"])
    out = _stage_dir(cfg, "wind")
    step = int(wcfg["step_s"])
    n_steps = int(wcfg["window_minutes"]) * 60 // step + 1

    stamps, farm_ids, speeds = read_wind_5min(cfg.paths["wind_5min"])
    case_farms = [w.id for w in case.wind_farms]
    missing = sorted(set(case_farms) - set(farm_ids))
    if missing:
        raise ValidationError(f"5-minute wind data has no series for farms {missing}")
    start = cfg.start_utc
    end = start + timedelta(hours=1)
    window = [i for i, t in enumerate(stamps) if start <= t <= end]
    expected = int(3600 // (wcfg["window_minutes"] * 60)) + 1
    if len(window) != expected or stamps[window[0]] != start or stamps[window[-1]] != end:
        raise CoverageError(f"5-minute wind data must cover {format_utc(start)} to {format_utc(end)}")
    cols = [farm_ids.index(f) for f in case_farms]
    v5 = speeds[np.ix_(window, cols)]

    _, history = read_wind_history(cfg.paths["wind_history"])
    psi = estimate_sigma_distribution(history[::step], n_steps, stride=int(wcfg["history_stride"]),
                                      method=wcfg["sigma_method"])
    lattice = build_reference_lattice(case.wind_farms, case.correlation_curve,
                                      float(wcfg["spacing_km"]))
    fine = synthesize_wind_speeds(v5, lattice, psi, n_steps, cfg.stage_seed("wind"))
    offsets = np.arange(fine.shape[0]) * step
    power = np.column_stack([
        farm_power_series(w, fine[:, e], case.turbine_curves[w.turbine_curve_id])
        for e, w in enumerate(case.wind_farms)])
    total = power.sum(axis=1)

    names = tuple(f"farm_{f}" for f in case_farms)
    write_table(out / "speeds.csv", ("offset_s",) + names,
                ([int(t)] + [float(v) for v in row] for t, row in zip(offsets, fine)))
    write_table(out / "power.csv", ("offset_s",) + names + ("total_mw",),
                ([int(t)] + [float(v) for v in row] + [float(tt)]
                 for t, row, tt in zip(offsets, power, total)))
    write_table(out / "lattice.csv", ("point", "lat", "lon") + names,
                ([n, float(p.latitude), float(p.longitude)] + [float(v) for v in lattice.weights[:, n]]
                 for n, p in enumerate(lattice.points)))
    inputs = {"case": cfg.paths["case"], "wind_5min": cfg.paths["wind_5min"],
              "wind_history": cfg.paths["wind_history"]}
    return write_manifest(out, "wind", cfg, inputs, {
        "n_reference_points": len(lattice.points), "sigma_windows": int(psi.samples.size),
        "step_s": step, "steps_per_window": n_steps})


@_stage("compose")
def cmd_compose(cfg: PipelineConfig) -> dict:
    """Dynamic load compositions for each period touched by the emission window."""
    cfg.require("case")
    case = load_grid_case(cfg.paths["case"])
    out = _stage_dir(cfg, "compose")
    windows = cfg.compose["period_windows"]
    first = cfg.start_utc + timedelta(minutes=cfg.emit["offset_minutes"])
    last = first + timedelta(minutes=cfg.emit["duration_minutes"])
    periods = []
    t = first.replace(minute=0)
    while t < last or t == first.replace(minute=0):
        p = classify_period(t.hour, windows)
        if p not in periods:
            periods.append(p)
        t += timedelta(hours=1)
    table = CompositionTable.default()
    rows = [compose(bus, p, table) for p in periods for bus in case.buses]
    write_compositions(rows, out / "compositions.csv")
    inputs = {"case": cfg.paths["case"]}
    if cfg.paths.get("cmpldw_params"):
        cfg.require("cmpldw_params")
        shutil.copyfile(cfg.paths["cmpldw_params"], out / Path(cfg.paths["cmpldw_params"]).name)
        inputs["cmpldw_params"] = cfg.paths["cmpldw_params"]
    return write_manifest(out, "compose", cfg, inputs, {"periods": periods})


def _read_series(path, prefix, ids, name, time_scale, shift_s):
    header, data = read_table(path)
    cols = []
    for i in ids:
        key = f"{prefix}{i}"
        if key not in header:
            raise ValidationError(f"{path}: missing column {key}")
        cols.append(header.index(key))
    values = data[:, cols] if cols else np.zeros((data.shape[0], 0))
    return SeriesTable(name=name, offsets_s=data[:, 0] * time_scale - shift_s, ids=tuple(ids),
                       values=values)


@_stage("emit")
def cmd_emit(cfg: PipelineConfig) -> dict:
    """Synthetic measurement frames from the demand and wind stage outputs."""
    cfg.require("case")
    ecfg = cfg.emit
    demand_csv = cfg.output_dir / "demand" / "minutely_load.csv"
    power_csv = cfg.output_dir / "wind" / "power.csv"
    for p in (demand_csv, power_csv):
        if not p.exists():
            raise ValidationError(f"{p} not found; run the demand and wind stages first")
    case = load_grid_case(cfg.paths["case"])
    out = _stage_dir(cfg, "emit")
    shift = 60.0 * ecfg["offset_minutes"]
    loads = _read_series(demand_csv, "bus_", [b.id for b in case.buses], "minutely load", 60.0, shift)
    wind = _read_series(power_csv, "farm_", [w.id for w in case.wind_farms], "wind power", 1.0, shift)
    step = int(ecfg["step_s"])
    timeline = Timeline(start_utc=cfg.start_utc + timedelta(seconds=shift), step_s=step,
                        horizon=int(ecfg["duration_minutes"]) * 60 // step)
    rng = np.random.default_rng(cfg.stage_seed("measurement-noise"))
    injections = build_timeline_inputs(case, loads, wind, timeline, ecfg["noise_sigma"],
                                       ecfg["power_factor"], rng)
    frames, events = emit_frames(case, injections, timeline, ecfg["loss_fraction"],
                                 int(ecfg["redispatch_period_s"]), ecfg["tolerance"],
                                 int(ecfg["max_iterations"]), bool(ecfg["dc_fallback"]))
    write_tsb(frames, out / "frames.tsb")
    if ecfg.get("upsample_fps"):
        up = upsample_frames(frames, step, int(ecfg["upsample_fps"]), ecfg["upsample_sigma"],
                             np.random.default_rng(cfg.stage_seed("upsample")))
        write_tsb(up, out / "frames_upsampled.tsb")
    if ecfg.get("export_channels"):
        export_csv(frames, ecfg["export_channels"], out / "frames.csv")
    inputs = {"case": cfg.paths["case"], "minutely_load": demand_csv, "wind_power": power_csv}
    return write_manifest(out, "emit", cfg, inputs, {
        "frames": len(frames), "converged_frames": sum(f.converged for f in frames),
        "redispatch_steps": events, "max_mismatch_pu": max(f.mismatch for f in frames)})


def cmd_all(cfg: PipelineConfig) -> dict:
    """Run every stage in order and write a combined manifest."""
    stages = {"demand": cmd_demand(cfg), "wind": cmd_wind(cfg), "compose": cmd_compose(cfg),
              "emit": cmd_emit(cfg)}
    doc = {"command": "all", "version": __version__, "seed": cfg.seed,
           "stages": {name: sha256_file(cfg.output_dir / name / "manifest.json") for name in stages}}
    (cfg.output_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")
    return doc
