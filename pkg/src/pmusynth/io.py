"""CSV readers and writers for the external datasets and stage outputs."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np

from .demand.hourly import PrototypeProfile
from .exceptions import ParseError, ValidationError
from .grid import GeoPoint


def parse_utc(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_utc(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _float(text, where):
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"{where}: not a number: {text!r}") from exc
    return value


def _rows(path, expected_header):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != list(expected_header):
            raise ParseError(f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ParseError(f"{path}:{lineno}: expected {len(expected_header)} fields")
            yield lineno, row


def _check_load(value, where):
    if math.isnan(value) or value < 0:
        raise ValidationError(f"{where}: load must be a nonnegative number, got {value}")
    return value


def read_load_history(path) -> dict:
    """Minutely loads per date: ``{date: array of M values ordered by minute}``."""
    by_date = defaultdict(dict)
    for lineno, (d, minute, load) in _rows(path, ("date", "minute_of_hour", "load_mw")):
        where = f"{path}:{lineno}"
        try:
            day = date.fromisoformat(d.strip())
        except ValueError as exc:
            raise ParseError(f"{where}: bad date {d!r}") from exc
        by_date[day][int(minute)] = _check_load(_float(load, where), where)
    out = {}
    lengths = set()
    for day in sorted(by_date):
        minutes = by_date[day]
        m = len(minutes)
        if sorted(minutes) != list(range(m)):
            raise ValidationError(f"{path}: {day} minutes must run 0..{m - 1} without gaps")
        lengths.add(m)
        out[day] = np.array([minutes[i] for i in range(m)])
    if len(lengths) > 1:
        raise ValidationError(f"{path}: days have different numbers of minutes {sorted(lengths)}")
    if not out:
        raise ParseError(f"{path}: no load rows")
    return out


def read_prototype(path) -> PrototypeProfile:
    """Prototype CSV: ``sector,lat,lon`` header, one metadata row, then one value per hour."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
            meta = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: missing header or metadata row") from None
        if header != ["sector", "lat", "lon"]:
            raise ParseError(f"{path}: expected header sector,lat,lon")
        values = []
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            where = f"{path}:{lineno}"
            values.append(_check_load(_float(row[0], where), where))
    sector = meta[0].strip()
    loc = GeoPoint(_float(meta[1], str(path)), _float(meta[2], str(path)))
    return PrototypeProfile(sector=sector, location=loc, hourly_values=np.array(values), name=path.stem)


def read_prototypes(path) -> list:
    """A single prototype file or every ``*.csv`` in a directory (sorted by name)."""
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise ValidationError(f"{path}: no prototype profiles found")
    return [read_prototype(f) for f in files]


def read_wind_5min(path):
    """Returns ``(timestamps, farm_ids, speeds)`` with speeds shaped (T, n_farms)."""
    data = defaultdict(dict)
    for lineno, (fid, ts, speed) in _rows(path, ("farm_id", "timestamp_utc", "speed_mps")):
        where = f"{path}:{lineno}"
        v = _float(speed, where)
        if math.isnan(v) or v < 0:
            raise ValidationError(f"{where}: wind speed must be nonnegative")
        data[int(fid)][parse_utc(ts)] = v
    farm_ids = sorted(data)
    stamps = sorted(set().union(*[set(d) for d in data.values()])) if data else []
    for fid in farm_ids:
        missing = [t for t in stamps if t not in data[fid]]
        if missing:
            raise ValidationError(f"{path}: farm {fid} has no sample at {format_utc(missing[0])}")
    speeds = np.array([[data[f][t] for f in farm_ids] for t in stamps])
    return stamps, farm_ids, speeds


def read_wind_history(path):
    """Returns ``(timestamps, speeds)`` from a high-resolution history file."""
    stamps, speeds = [], []
    for lineno, (ts, speed) in _rows(path, ("timestamp_utc", "speed_mps")):
        stamps.append(parse_utc(ts))
        speeds.append(_float(speed, f"{path}:{lineno}"))
    if not stamps:
        raise ParseError(f"{path}: no wind history rows")
    return stamps, np.array(speeds)


def write_table(path, header, rows) -> None:
    """CSV with ``repr`` floats so values survive a round trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path):
    """Inverse of :func:`write_table` for numeric tables: ``(header, 2-D array)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return header, np.array(rows)
