"""Quasi-steady-state AC power-flow snapshots (Newton-Raphson, polar form)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ..exceptions import PowerFlowError

log = logging.getLogger(__name__)


@dataclass
class MeasurementFrame:
    """One emission instant. Powers in MW / MVAr, voltages in p.u. / rad."""

    timestamp_us: int
    bus_ids: tuple
    vm: np.ndarray
    va: np.ndarray
    gen_ids: tuple
    gen_p: np.ndarray
    gen_q: np.ndarray
    wind_ids: tuple
    wind_p: np.ndarray
    load_bus_ids: tuple
    load_p: np.ndarray
    load_q: np.ndarray
    converged: bool
    iterations: int = 0
    mismatch: float = field(default=float("nan"), compare=False)


def build_ybus(case) -> np.ndarray:
    """Dense bus admittance matrix (p.u.) from pi-model lines."""
    idx = case.bus_index
    n = len(case.buses)
    Y = np.zeros((n, n), dtype=complex)
    for ln in case.lines:
        f, t = idx[ln.from_bus], idx[ln.to_bus]
        y = 1.0 / complex(ln.r_pu, ln.x_pu)
        ysh = 0.5j * ln.b_pu
        Y[f, f] += y + ysh
        Y[t, t] += y + ysh
        Y[f, t] -= y
        Y[t, f] -= y
    return Y


def check_connected(case) -> None:
    """Raise ``PowerFlowError`` naming any buses not connected to the slack."""
    idx = case.bus_index
    n = len(case.buses)
    rows = [idx[ln.from_bus] for ln in case.lines]
    cols = [idx[ln.to_bus] for ln in case.lines]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    slack_comp = comp[idx[case.slack_bus_id]]
    island = [b.id for b, c in zip(case.buses, comp) if c != slack_comp]
    if island:
        raise PowerFlowError(f"buses {island} form an island without the slack bus")


def bus_types(case):
    """Indices of the slack bus, PV buses and PQ buses, plus PV setpoints."""
    idx = case.bus_index
    ref = idx[case.slack_bus_id]
    vset = {}
    for g in case.generators:
        vset.setdefault(idx[g.bus_id], g.vm_setpoint_pu)
    pv = np.array(sorted(i for i in vset if i != ref), dtype=int)
    pq = np.array([i for i in range(len(case.buses)) if i != ref and i not in vset], dtype=int)
    return ref, pv, pq, vset


def _jacobian(Y, V):
    Ibus = Y @ V
    diagV = np.diag(V)
    diagI = np.diag(Ibus)
    diagVn = np.diag(V / np.abs(V))
    dS_dVa = 1j * diagV @ np.conj(diagI - Y @ diagV)
    dS_dVm = diagV @ np.conj(Y @ diagVn) + np.conj(diagI) @ diagVn
    return dS_dVa, dS_dVm


def newton_raphson(Y, Sbus, V0, ref, pv, pq, tol=1e-10, max_iter=30):
    """Solve ``V * conj(Y V) = Sbus`` at PV/PQ buses.

    Returns ``(V, converged, iterations, trace)`` where ``trace`` lists the
    infinity-norm mismatch per iteration. A singular Jacobian raises
    ``PowerFlowError`` carrying the trace.
    """
    V = np.asarray(V0, dtype=complex).copy()
    Va, Vm = np.angle(V), np.abs(V)
    pvpq = np.concatenate([pv, pq]).astype(int)
    npv, npq = len(pv), len(pq)
    trace = []

    def mismatch(V):
        mis = V * np.conj(Y @ V) - Sbus
        return np.concatenate([mis[pvpq].real, mis[pq].imag])

    F = mismatch(V)
    trace.append(float(np.abs(F).max()) if F.size else 0.0)
    if trace[-1] < tol:
        return V, True, 0, trace
    for it in range(1, max_iter + 1):
        dS_dVa, dS_dVm = _jacobian(Y, V)
        J = np.block([
            [dS_dVa[np.ix_(pvpq, pvpq)].real, dS_dVm[np.ix_(pvpq, pq)].real],
            [dS_dVa[np.ix_(pq, pvpq)].imag, dS_dVm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular Jacobian at iteration {it}; mismatch trace {trace}") from exc
        Va[pvpq] += dx[: npv + npq]
        Vm[pq] += dx[npv + npq:]
        V = Vm * np.exp(1j * Va)
        F = mismatch(V)
        trace.append(float(np.abs(F).max()))
        if not np.all(np.isfinite(F)):
            raise PowerFlowError(f"power flow diverged at iteration {it}; mismatch trace {trace}")
        if trace[-1] < tol:
            return V, True, it, trace
    return V, False, max_iter, trace


def dc_angles(case, p_inj_pu, ref):
    """Linearized angles from ``B' theta = P`` (slack angle 0)."""
    idx = case.bus_index
    n = len(case.buses)
    B = np.zeros((n, n))
    for ln in case.lines:
        f, t = idx[ln.from_bus], idx[ln.to_bus]
        b = 1.0 / ln.x_pu
        B[f, f] += b
        B[t, t] += b
        B[f, t] -= b
        B[t, f] -= b
    keep = [i for i in range(n) if i != ref]
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(B[np.ix_(keep, keep)], np.asarray(p_inj_pu)[keep])
    return theta


def solve_snapshot(case, load_p, load_q, wind_p, setpoints, timestamp_us=0, V0=None,
                   Y=None, tol=1e-10, max_iter=30, dc_fallback=False) -> MeasurementFrame:
    """Power flow for one instant.

    ``load_p``/``load_q`` are per-bus MW/MVAr in case bus order, ``wind_p``
    per-farm MW in case order and ``setpoints`` per-generator MW in case
    order. Non-slack generators hold their setpoint; the slack generators
    absorb the imbalance in proportion to their capacity. ``V0`` warm-starts
    the solve (defaults to setpoint magnitudes, zero angles).
    """
    Y = build_ybus(case) if Y is None else Y
    idx = case.bus_index
    n = len(case.buses)
    base = case.base_mva
    ref, pv, pq, vset = bus_types(case)

    gen_bus = np.array([idx[g.bus_id] for g in case.generators], dtype=int)
    setpoints = np.asarray(setpoints, dtype=float)
    on_slack = gen_bus == ref
    p_fixed = np.zeros(n)
    np.add.at(p_fixed, gen_bus[~on_slack], setpoints[~on_slack])
    wind_bus = np.array([idx[w.bus_id] for w in case.wind_farms], dtype=int)
    wind_p = np.asarray(wind_p, dtype=float)
    np.add.at(p_fixed, wind_bus, wind_p)
    load_p = np.asarray(load_p, dtype=float)
    load_q = np.asarray(load_q, dtype=float)
    Sbus = (p_fixed - load_p - 1j * load_q) / base

    if V0 is None:
        vm0 = np.ones(n)
        for i, v in vset.items():
            vm0[i] = v
        V0 = vm0.astype(complex)
    else:
        V0 = np.asarray(V0, dtype=complex).copy()
        for i, v in vset.items():
            V0[i] = v * np.exp(1j * np.angle(V0[i]))
        V0[ref] = abs(V0[ref])

    V, converged, iterations, trace = newton_raphson(Y, Sbus, V0, ref, pv, pq, tol, max_iter)
    if not converged:
        log.warning("power flow did not converge in %d iterations (mismatch %.3g)",
                    max_iter, trace[-1])
    S = V * np.conj(Y @ V) * base  # net injection, MVA
    gen_side = S + load_p + 1j * load_q
    gen_side_p = gen_side.real - np.bincount(wind_bus, wind_p, minlength=n)

    gen_p = setpoints.copy()
    gen_q = np.zeros(len(case.generators))
    pmax = np.array([g.p_max_mw for g in case.generators])
    for b in np.unique(gen_bus):
        members = np.flatnonzero(gen_bus == b)
        share = pmax[members] / pmax[members].sum() if pmax[members].sum() > 0 else \
            np.full(members.size, 1.0 / members.size)
        gen_q[members] = gen_side.imag[b] * share
        if b == ref:
            gen_p[members] = gen_side_p[b] * share

    vm, va = np.abs(V), np.angle(V)
    if not converged and dc_fallback:
        va = dc_angles(case, Sbus.real, ref)
        vm = np.full(n, np.nan)
    return MeasurementFrame(
        timestamp_us=int(timestamp_us), bus_ids=tuple(b.id for b in case.buses), vm=vm, va=va,
        gen_ids=tuple(g.id for g in case.generators), gen_p=gen_p, gen_q=gen_q,
        wind_ids=tuple(w.id for w in case.wind_farms), wind_p=wind_p.copy(),
        load_bus_ids=tuple(b.id for b in case.buses), load_p=load_p.copy(), load_q=load_q.copy(),
        converged=bool(converged), iterations=int(iterations), mismatch=trace[-1])
