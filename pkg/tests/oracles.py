"""Independent reference computations shared by several test modules."""
import itertools
import math

import numpy as np

from pmusynth.grid import great_circle_distance


def branch_balance_residual(case, frame):
    """Max |sum of pi-model branch flows - (gen + wind - load)| over buses, in p.u.

    Built line by line from the solved voltages; shares nothing with the
    admittance-matrix code under test.
    """
    idx = {b.id: i for i, b in enumerate(case.buses)}
    V = frame.vm * np.exp(1j * frame.va)
    flow = np.zeros(len(case.buses), dtype=complex)
    for ln in case.lines:
        i, j = idx[ln.from_bus], idx[ln.to_bus]
        z = complex(ln.r_pu, ln.x_pu)
        shunt = 0.5j * ln.b_pu
        flow[i] += V[i] * np.conj((V[i] - V[j]) / z + shunt * V[i])
        flow[j] += V[j] * np.conj((V[j] - V[i]) / z + shunt * V[j])
    inj = np.zeros(len(case.buses), dtype=complex)
    for g, p, q in zip(case.generators, frame.gen_p, frame.gen_q):
        inj[idx[g.bus_id]] += complex(p, q)
    for w, p in zip(case.wind_farms, frame.wind_p):
        inj[idx[w.bus_id]] += p
    for b, p, q in zip(frame.load_bus_ids, frame.load_p, frame.load_q):
        inj[idx[b]] -= complex(p, q)
    return float(np.abs(flow - inj / case.base_mva).max())


def two_bus_doc(x_pu=0.1, load_mw=100.0):
    return {
        "format_version": 1, "name": "two-bus", "base_mva": 100.0, "slack_bus_id": 1,
        "zones": [{"id": 1}],
        "buses": [
            {"id": 1, "lat": 30.0, "lon": -97.0, "zone_id": 1, "peak_load_mw": 0.0, "rci_ratio": [1, 0, 0]},
            {"id": 2, "lat": 30.5, "lon": -97.0, "zone_id": 1, "peak_load_mw": load_mw,
             "rci_ratio": [1, 0, 0]},
        ],
        "generators": [{"id": 1, "bus_id": 1, "p_min_mw": 0.0, "p_max_mw": 500.0, "vm_setpoint_pu": 1.0}],
        "wind_farms": [],
        "lines": [{"from_bus": 1, "to_bus": 2, "r_pu": 0.0, "x_pu": x_pu, "b_pu": 0.0}],
    }


def brute_force_optimum(zone_pts, patterns, counts, eps=1e-6):
    """Independent enumeration: distinct label multiset permutations, log10 entropy."""
    n = len(zone_pts)
    D = [[great_circle_distance(a, b) for b in zone_pts] for a in zone_pts]
    K = len(patterns)
    dist = [[max(eps, math.dist(patterns[a], patterns[b])) if a != b else eps
             for b in range(K)] for a in range(K)]
    base = [k for k, c in enumerate(counts) for _ in range(c)]
    best = -math.inf
    for labels in set(itertools.permutations(base)):
        zetas = [D[i][j] / dist[labels[i]][labels[j]] for i in range(n) for j in range(i + 1, n)]
        tot = sum(zetas)
        h = -sum(q / tot * math.log10(q / tot) for q in zetas if q > 0) if tot > 0 else 0.0
        best = max(best, h)
    return best
