"""Frame production loop and CSV export."""
from __future__ import annotations

import csv
from datetime import datetime, timezone

import numpy as np

from ..exceptions import ValidationError
from .dispatch import redispatch
from .powerflow import MeasurementFrame, build_ybus, check_connected, solve_snapshot
from .timeline import StepInjections, Timeline
from .tsb import frames_to_tsb

REDISPATCH_PERIOD_S = 900


def emit_frames(case, injections: StepInjections, timeline: Timeline, loss_fraction=0.0,
                redispatch_period_s=REDISPATCH_PERIOD_S, tol=1e-10, max_iter=30,
                dc_fallback=False):
    """Solve one snapshot per timeline step.

    Generators are re-dispatched at every multiple of ``redispatch_period_s``
    (step 0 included) against the noise-free load and wind; in between the
    slack absorbs imbalance. Each solve warm-starts from the previous one.

    Returns ``(frames, redispatch_steps)``.
    """
    if redispatch_period_s % timeline.step_s:
        raise ValidationError("re-dispatch period must be a multiple of the step")
    check_connected(case)
    Y = build_ybus(case)
    per = redispatch_period_s // timeline.step_s
    frames, events = [], []
    state, V = None, None
    for step, ts in enumerate(timeline.timestamps_us):
        if step % per == 0:
            state = redispatch(case, injections.load_p_clean[step].sum(),
                               injections.wind_p[step].sum(), step, per, loss_fraction, state)
            events.append(step)
        frame = solve_snapshot(case, injections.load_p[step], injections.load_q[step],
                               injections.wind_p[step], state.setpoints, ts, V0=V, Y=Y,
                               tol=tol, max_iter=max_iter, dc_fallback=dc_fallback)
        if frame.converged:
            V = frame.vm * np.exp(1j * frame.va)
        frames.append(frame)
    return frames, events


def upsample_frames(frames, step_s, fps=30, sigma=0.001, rng=None):
    """Repeat each snapshot at ``fps`` with small independent magnitude noise.

    This imitates a PMU reporting rate only; no dynamics are added between
    snapshots.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    per_step = int(round(step_s * fps))
    out = []
    for i, fr in enumerate(frames):
        reps = 1 if i == len(frames) - 1 else per_step
        for r in range(reps):
            vm = fr.vm * (1.0 + rng.normal(0.0, sigma, fr.vm.shape)) if r else fr.vm.copy()
            out.append(MeasurementFrame(
                timestamp_us=fr.timestamp_us + (r * 1_000_000) // fps, bus_ids=fr.bus_ids, vm=vm,
                va=fr.va.copy(), gen_ids=fr.gen_ids, gen_p=fr.gen_p.copy(), gen_q=fr.gen_q.copy(),
                wind_ids=fr.wind_ids, wind_p=fr.wind_p.copy(), load_bus_ids=fr.load_bus_ids,
                load_p=fr.load_p.copy(), load_q=fr.load_q.copy(), converged=fr.converged,
                iterations=fr.iterations))
    return out


def format_timestamp(us: int) -> str:
    dt = datetime.fromtimestamp(int(us) // 1_000_000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{int(us) % 1_000_000:06d}Z"


def export_csv(frames, selection, path) -> None:
    """Write selected channels, one row per frame, 10 significant digits."""
    tsb = frames_to_tsb(frames)
    selection = list(selection)
    if not selection:
        raise ValidationError("channel selection is empty")
    unknown = [s for s in selection if s not in tsb.names]
    if unknown:
        raise ValidationError(f"unknown channels {unknown}; available: {', '.join(tsb.names)}")
    cols = [tsb.names.index(s) for s in selection]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["timestamp_utc"] + selection)
        for t, row in zip(tsb.timestamps_us, tsb.values):
            writer.writerow([format_timestamp(t)] + [f"{row[c]:.10g}" for c in cols])
