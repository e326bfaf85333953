"""Pipeline configuration (one YAML file).

Relative paths are resolved against the config file's directory. Every
constant the method leaves open has a default here.
"""
from __future__ import annotations

import copy
import zlib
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .composition import DEFAULT_PERIOD_WINDOWS, validate_period_windows
from .exceptions import ConfigurationError, ParseError, ValidationError
from .io import parse_utc

DEFAULTS = {
    "paths": {"case": None, "load_history": None, "prototypes": None, "wind_5min": None,
              "wind_history": None, "output_dir": "out", "cmpldw_params": None},
    "simulation": {"start_utc": None},
    "demand": {
        "K": 4,
        "season_days": [[1, 366]],
        "same_cluster_distance": 1e-6,
        "forecast_noise_sigma": 0.0,
        "kmeans_n_init": 10,
        "kmeans_max_iter": 300,
        "kmeans_tol": 1e-8,
        "peak_tolerance": 1e-6,
        "share_tolerance": 1e-6,
        "exhaustive_limit": 1_000_000,
        "annealing_iterations": 20_000,
    },
    "wind": {"step_s": 15, "window_minutes": 5, "history_stride": 1, "sigma_method": "empirical",
             "spacing_km": 600.0},
    "compose": {"period_windows": DEFAULT_PERIOD_WINDOWS},
    "emit": {"offset_minutes": 0, "duration_minutes": 10, "step_s": 15, "noise_sigma": 0.01,
             "power_factor": 0.95, "loss_fraction": 0.0, "redispatch_period_s": 900,
             "tolerance": 1e-10, "max_iterations": 30, "dc_fallback": False,
             "export_channels": None, "upsample_fps": None, "upsample_sigma": 0.001},
}

FLOAT_KEYS = {"same_cluster_distance", "forecast_noise_sigma", "kmeans_tol", "peak_tolerance",
              "share_tolerance", "spacing_km", "noise_sigma", "power_factor", "loss_fraction",
              "tolerance", "upsample_sigma"}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "period_windows":
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _coerce(section):
    # YAML reads "1e-6" (no dot) as a string
    for key, value in section.items():
        if key in FLOAT_KEYS and value is not None:
            section[key] = float(value)
    return section


@dataclass
class PipelineConfig:
    seed: int
    paths: dict
    simulation: dict
    demand: dict
    wind: dict
    compose: dict
    emit: dict
    source: Path | None = None

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None, seed_override=None) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ParseError("config must be a mapping")
        seed = seed_override if seed_override is not None else doc.get("seed")
        if seed is None:
            raise ConfigurationError("a seed is required (config 'seed' or --seed)")
        seed = int(seed)
        if not (0 <= seed < 2**64):
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        merged = _merge(DEFAULTS, {k: v for k, v in doc.items() if k != "seed"})
        unknown = set(merged) - set(DEFAULTS)
        if unknown:
            raise ConfigurationError(f"unknown config sections {sorted(unknown)}")
        base_dir = Path(base_dir or ".")
        paths = {k: (None if v is None else (base_dir / v).resolve() if not Path(v).is_absolute()
                     else Path(v)) for k, v in merged["paths"].items()}
        cfg = cls(seed=seed, paths=paths, simulation=merged["simulation"],
                  demand=_coerce(merged["demand"]), wind=_coerce(merged["wind"]),
                  compose=merged["compose"], emit=_coerce(merged["emit"]))
        cfg.check_knobs()
        return cfg

    @classmethod
    def load(cls, path, seed_override=None) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ValidationError(f"config file {path} does not exist")
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        cfg = cls.from_dict(doc or {}, path.parent, seed_override)
        cfg.source = path
        return cfg

    def check_knobs(self):
        if self.simulation.get("start_utc") is None:
            raise ConfigurationError("simulation.start_utc is required")
        start = self.start_utc
        if start.minute or start.second or start.microsecond:
            raise ConfigurationError("simulation.start_utc must be on the hour")
        if int(self.demand["K"]) < 1:
            raise ConfigurationError("demand.K must be at least 1")
        for key in ("step_s",):
            for section in (self.wind, self.emit):
                if 60 % int(section[key]):
                    raise ConfigurationError(f"{key} must divide 60")
        if (self.wind["window_minutes"] * 60) % int(self.wind["step_s"]):
            raise ConfigurationError("wind window must be a whole number of steps")
        validate_period_windows(self.compose["period_windows"])
        if not (0 < self.emit["power_factor"] <= 1):
            raise ConfigurationError("emit.power_factor must lie in (0, 1]")
        if self.emit["offset_minutes"] + self.emit["duration_minutes"] > 60:
            raise ConfigurationError("emission window must lie within the simulated hour")

    @property
    def start_utc(self):
        value = self.simulation["start_utc"]
        if isinstance(value, str):
            return parse_utc(value)
        if isinstance(value, datetime):
            return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
        raise ConfigurationError(f"simulation.start_utc: cannot parse {value!r}")

    @property
    def output_dir(self) -> Path:
        return Path(self.paths["output_dir"])

    def require(self, *keys):
        for key in keys:
            p = self.paths.get(key)
            if p is None:
                raise ValidationError(f"paths.{key} is required for this command")
            if not Path(p).exists():
                raise ValidationError(f"paths.{key}: {p} does not exist")

    def stage_seed(self, label: str) -> int:
        """Independent per-stage seed derived from the master seed."""
        ss = np.random.SeedSequence([self.seed & 0xFFFFFFFF, self.seed >> 32, zlib.crc32(label.encode())])
        return int(ss.generate_state(2, dtype=np.uint64)[0])
