"""Periodic proportional re-dispatch of conventional generators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InfeasibleError, ValidationError


@dataclass(frozen=True)
class DispatchState:
    setpoints: np.ndarray       # MW, case generator order
    slack_bus_id: int
    last_redispatch_step: int
    target_mw: float


def allocate(target_mw, p_min, p_max, participation) -> np.ndarray:
    """Split ``target_mw`` proportionally to participation within limits.

    Generators pushed past a limit are pinned there and the remainder is
    re-shared among the others until no limit is violated.
    """
    p_min = np.asarray(p_min, dtype=float)
    p_max = np.asarray(p_max, dtype=float)
    part = np.asarray(participation, dtype=float)
    if target_mw > p_max.sum() + 1e-9:
        raise InfeasibleError(
            f"insufficient dispatchable capacity: shortfall {target_mw - p_max.sum():.3f} MW")
    if target_mw < p_min.sum() - 1e-9:
        raise InfeasibleError(
            f"net load below total minimum generation by {p_min.sum() - target_mw:.3f} MW")
    out = np.zeros_like(p_max)
    free = part > 0
    # generators without participation sit at their minimum
    out[~free] = p_min[~free]
    remaining = target_mw - out[~free].sum()
    while free.any():
        trial = remaining * part[free] / part[free].sum()
        ids = np.flatnonzero(free)
        over = trial > p_max[ids] + 1e-12
        under = trial < p_min[ids] - 1e-12
        if over.any():
            pinned = ids[over]
            out[pinned] = p_max[pinned]
        elif under.any():
            pinned = ids[under]
            out[pinned] = p_min[pinned]
        else:
            out[ids] = trial
            return out
        free[pinned] = False
        remaining -= out[pinned].sum()
    if abs(remaining) > 1e-6:
        raise InfeasibleError(f"cannot place {remaining:.3f} MW within generator limits")
    return out


def redispatch(case, load_forecast_mw, wind_forecast_mw, step, steps_per_redispatch,
               loss_fraction=0.0, state: DispatchState | None = None) -> DispatchState:
    """New setpoints covering forecast net load plus losses.

    Only valid at multiples of ``steps_per_redispatch``. If the target equals
    the previous state's target, that state's setpoints are kept.
    """
    if steps_per_redispatch < 1 or step % steps_per_redispatch:
        raise ValidationError(f"step {step} is not a re-dispatch instant "
                              f"(every {steps_per_redispatch} steps)")
    target = (float(load_forecast_mw) - float(wind_forecast_mw)) * (1.0 + loss_fraction)
    if state is not None and abs(target - state.target_mw) <= 1e-9:
        return DispatchState(state.setpoints, state.slack_bus_id, step, state.target_mw)
    gens = case.generators
    setpoints = allocate(target, [g.p_min_mw for g in gens], [g.p_max_mw for g in gens],
                         [g.participation for g in gens])
    return DispatchState(setpoints=setpoints, slack_bus_id=case.slack_bus_id,
                         last_redispatch_step=step, target_mw=target)
