"""Time-series binary (tsb) container.

Layout, all integers little-endian::

    b"GSTB"  u16 version (=1)  u32 channel_count
    channel_count x (u16 name_len, name UTF-8, u8 unit_code)
    u64 frame_count
    frame_count x (u64 utc_microseconds, channel_count x f64)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import TsbMagicError, TsbTruncatedError, TsbVersionError, ValidationError
from .powerflow import MeasurementFrame

MAGIC = b"GSTB"
VERSION = 1
UNITS = {0: "", 1: "pu", 2: "rad", 3: "MW", 4: "MVAr"}
UNIT_CODES = {v: k for k, v in UNITS.items()}


@dataclass
class TsbFile:
    names: list
    units: list          # unit codes
    timestamps_us: np.ndarray
    values: np.ndarray   # (frames, channels) float64

    @property
    def frame_size(self) -> int:
        return 8 + 8 * len(self.names)


def header_bytes(names, units) -> bytes:
    parts = [MAGIC, struct.pack("<HI", VERSION, len(names))]
    for name, unit in zip(names, units):
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", unit))
    return b"".join(parts)


def write_tsb_raw(tsb: TsbFile, path) -> None:
    values = np.ascontiguousarray(tsb.values, dtype="<f8")
    n_frames, n_chan = values.shape
    if n_chan != len(tsb.names) or len(tsb.units) != n_chan:
        raise ValidationError("channel directory does not match value columns")
    if len(tsb.timestamps_us) != n_frames:
        raise ValidationError("one timestamp per frame is required")
    record = np.dtype([("t", "<u8"), ("v", "<f8", (n_chan,))])
    frames = np.empty(n_frames, dtype=record)
    frames["t"] = np.asarray(tsb.timestamps_us, dtype=np.uint64)
    frames["v"] = values
    with open(path, "wb") as fh:
        fh.write(header_bytes(tsb.names, tsb.units))
        fh.write(struct.pack("<Q", n_frames))
        fh.write(frames.tobytes())


def read_tsb_raw(path) -> TsbFile:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise TsbMagicError(f"{path}: bad magic {data[:4]!r}")
    pos = 4
    try:
        version, n_chan = struct.unpack_from("<HI", data, pos)
        pos += 6
        if version != VERSION:
            raise TsbVersionError(f"{path}: unknown tsb version {version}")
        names, units = [], []
        for _ in range(n_chan):
            (length,) = struct.unpack_from("<H", data, pos)
            pos += 2
            if pos + length + 1 > len(data):
                raise TsbTruncatedError(f"{path}: truncated channel directory")
            names.append(data[pos:pos + length].decode("utf-8"))
            pos += length
            (unit,) = struct.unpack_from("<B", data, pos)
            units.append(unit)
            pos += 1
        (n_frames,) = struct.unpack_from("<Q", data, pos)
        pos += 8
    except struct.error as exc:
        raise TsbTruncatedError(f"{path}: truncated header") from exc
    record = np.dtype([("t", "<u8"), ("v", "<f8", (n_chan,))])
    payload = len(data) - pos
    if payload != n_frames * record.itemsize:
        raise TsbTruncatedError(f"{path}: payload is {payload} bytes, expected "
                                f"{n_frames} frames x {record.itemsize} bytes")
    frames = np.frombuffer(data, dtype=record, count=n_frames, offset=pos)
    return TsbFile(names=names, units=units, timestamps_us=frames["t"].astype(np.uint64),
                   values=frames["v"].reshape(n_frames, n_chan).astype(np.float64))


_GROUPS = (
    # (attr, ids attr, kind, entity, unit)
    ("vm", "bus_ids", "vm", "bus", "pu"),
    ("va", "bus_ids", "va", "bus", "rad"),
    ("gen_p", "gen_ids", "p", "gen", "MW"),
    ("gen_q", "gen_ids", "q", "gen", "MVAr"),
    ("wind_p", "wind_ids", "p", "wind", "MW"),
    ("load_p", "load_bus_ids", "p", "load", "MW"),
    ("load_q", "load_bus_ids", "q", "load", "MVAr"),
)


def channel_directory(frame: MeasurementFrame):
    names, units = [], []
    for attr, ids_attr, kind, entity, unit in _GROUPS:
        for i in getattr(frame, ids_attr):
            names.append(f"{kind}:{entity}:{i}")
            units.append(UNIT_CODES[unit])
    names += ["converged", "iterations"]
    units += [0, 0]
    return names, units


def frames_to_tsb(frames) -> TsbFile:
    frames = list(frames)
    if not frames:
        raise ValidationError("cannot write an empty frame list")
    names, units = channel_directory(frames[0])
    rows = []
    for fr in frames:
        if channel_directory(fr)[0] != names:
            raise ValidationError("all frames must carry the same channels")
        rows.append(np.concatenate([np.asarray(getattr(fr, attr), dtype=float) for attr, *_ in _GROUPS]
                                   + [np.array([float(fr.converged), float(fr.iterations)])]))
    return TsbFile(names=names, units=units,
                   timestamps_us=np.array([fr.timestamp_us for fr in frames], dtype=np.uint64),
                   values=np.vstack(rows))


def tsb_to_frames(tsb: TsbFile) -> list:
    groups = {g[0]: ([], []) for g in _GROUPS}
    lookup = {(kind, entity): attr for attr, _, kind, entity, _ in _GROUPS}
    col_conv = col_iter = None
    for col, name in enumerate(tsb.names):
        if name == "converged":
            col_conv = col
        elif name == "iterations":
            col_iter = col
        else:
            kind, entity, ident = name.split(":")
            cols, ids = groups[lookup[(kind, entity)]]
            cols.append(col)
            ids.append(int(ident))
    frames = []
    for t, row in zip(tsb.timestamps_us, tsb.values):
        kwargs = {attr: row[groups[attr][0]].copy() for attr in groups}
        frames.append(MeasurementFrame(
            timestamp_us=int(t), bus_ids=tuple(groups["vm"][1]), gen_ids=tuple(groups["gen_p"][1]),
            wind_ids=tuple(groups["wind_p"][1]), load_bus_ids=tuple(groups["load_p"][1]),
            converged=bool(row[col_conv]) if col_conv is not None else True,
            iterations=int(row[col_iter]) if col_iter is not None else 0, **kwargs))
    return frames


def write_tsb(frames, path) -> None:
    write_tsb_raw(frames_to_tsb(frames), path)


def read_tsb(path) -> list:
    return tsb_to_frames(read_tsb_raw(path))
