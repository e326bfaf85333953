"""Assignment of load variation patterns to zones.

Each zone receives exactly one pattern and pattern ``k`` is used by ``Z_k``
zones. Among feasible assignments we maximize the base-10 entropy of the
normalized pair scores ``D[z, z'] / dist[k_z, k_z']`` over zone pairs
``z < z'``. Small instances are enumerated exhaustively; larger ones use
simulated annealing with label-swap moves, started from a greedy solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ..exceptions import InfeasibleError, ValidationError
from ..grid import pairwise_distances
from .patterns import SAME_CLUSTER_DISTANCE, LoadPatternLibrary

EXHAUSTIVE_LIMIT = 10**6


def target_counts(n_zones: int, probabilities) -> np.ndarray:
    """Rounded per-pattern zone counts, repaired so they sum to ``n_zones``.

    Counts start at ``round(Z * p_k)`` (halves rounded up). If the total is
    off, counts are moved one at a time: surplus is removed from the
    patterns with the most negative remainder ``Z*p_k - count`` and deficit
    is added to those with the largest remainder (ties by lower index).
    """
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("probabilities must be nonnegative and sum to 1")
    exact = n_zones * p
    counts = np.floor(exact + 0.5).astype(int)
    while counts.sum() > n_zones:
        rem = np.where(counts > 0, exact - counts, np.inf)
        counts[int(np.argmin(rem))] -= 1
    while counts.sum() < n_zones:
        counts[int(np.argmax(exact - counts))] += 1
    return counts


def multinomial_count(counts) -> int:
    total = math.factorial(int(sum(counts)))
    for c in counts:
        total //= math.factorial(int(c))
    return total


@dataclass(frozen=True)
class ZoneAssignment:
    zone_ids: tuple
    labels: np.ndarray      # pattern index per zone
    counts: np.ndarray      # Z_k
    objective_value: float
    method: str

    @property
    def c(self) -> np.ndarray:
        out = np.zeros((len(self.zone_ids), self.counts.size), dtype=int)
        out[np.arange(len(self.zone_ids)), self.labels] = 1
        return out

    def pattern_of(self, zone_id: int) -> int:
        return int(self.labels[self.zone_ids.index(zone_id)])

    def to_dict(self) -> dict:
        return {"zone_ids": list(self.zone_ids), "labels": [int(v) for v in self.labels],
                "counts": [int(v) for v in self.counts], "objective_value": self.objective_value,
                "method": self.method}

    @classmethod
    def from_dict(cls, doc):
        return cls(zone_ids=tuple(doc["zone_ids"]), labels=np.asarray(doc["labels"], dtype=int),
                   counts=np.asarray(doc["counts"], dtype=int),
                   objective_value=float(doc["objective_value"]), method=doc["method"])


def pattern_distance_matrix(patterns, same_cluster=SAME_CLUSTER_DISTANCE) -> np.ndarray:
    """Centroid distances with ``same_cluster`` on the diagonal.

    Off-diagonal zeros (coincident centroids) are floored at ``same_cluster``
    so the pair scores stay finite.
    """
    P = np.asarray(patterns, dtype=float)
    d = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, same_cluster)
    return np.maximum(d, same_cluster)


class _Scorer:
    def __init__(self, zone_dist, pattern_dist):
        self.zone_dist = np.asarray(zone_dist, dtype=float)
        self.pattern_dist = np.asarray(pattern_dist, dtype=float)
        n = self.zone_dist.shape[0]
        self.i, self.j = np.triu_indices(n, k=1)
        self.pair_dist = self.zone_dist[self.i, self.j]

    def batch(self, labels):
        labels = np.atleast_2d(labels)
        zeta = self.pair_dist[None, :] / self.pattern_dist[labels[:, self.i], labels[:, self.j]]
        total = zeta.sum(axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(total > 0, zeta / total, 0.0)
            terms = np.where(share > 0, share * np.log10(share), 0.0)
        return -terms.sum(axis=1)

    def __call__(self, labels):
        return float(self.batch(np.asarray(labels))[0])


def assignment_entropy(labels, zone_dist, pattern_dist) -> float:
    """Objective value of a label vector (one pattern index per zone)."""
    return _Scorer(zone_dist, pattern_dist)(labels)


def _enumerate(counts):
    """All label vectors with the given multiplicities, in lexicographic order."""
    counts = [int(c) for c in counts]
    n = sum(counts)
    current = [0] * n

    def rec(pos):
        if pos == n:
            yield tuple(current)
            return
        for k, c in enumerate(counts):
            if c:
                counts[k] -= 1
                current[pos] = k
                yield from rec(pos + 1)
                counts[k] += 1

    yield from rec(0)


def _exhaustive(scorer, counts, chunk=50_000):
    best_val, best_labels = -np.inf, None
    buf = []

    def flush():
        nonlocal best_val, best_labels
        arr = np.asarray(buf, dtype=int)
        vals = scorer.batch(arr)
        idx = int(np.argmax(vals))  # first maximum keeps lexicographic tie-break
        if vals[idx] > best_val:
            best_val, best_labels = float(vals[idx]), arr[idx].copy()
        buf.clear()

    for labels in _enumerate(counts):
        buf.append(labels)
        if len(buf) >= chunk:
            flush()
    if buf:
        flush()
    return best_labels, best_val


def greedy_assignment(scorer, counts):
    """Sequential baseline: each zone in turn takes the available pattern
    maximizing the objective over the zones assigned so far."""
    remaining = np.asarray(counts, dtype=int).copy()
    n = int(remaining.sum())
    labels = []
    for z in range(n):
        best_k, best_val = None, -np.inf
        for k in np.flatnonzero(remaining):
            trial = labels + [int(k)]
            sub = _Scorer(scorer.zone_dist[: z + 1, : z + 1], scorer.pattern_dist)
            val = sub(trial) if z > 0 else 0.0
            if val > best_val:
                best_k, best_val = int(k), val
        labels.append(best_k)
        remaining[best_k] -= 1
    labels = np.asarray(labels, dtype=int)
    return labels, scorer(labels)


def anneal(scorer, start, seed, n_iter=20_000, t_start=0.05, cooling=None, t_end=1e-5):
    """Simulated annealing over label swaps (column sums are preserved).

    Geometric cooling from ``t_start`` to ``t_end`` over ``n_iter`` moves.
    Returns the best labels seen and their objective.
    """
    rng = np.random.default_rng(seed)
    cooling = cooling or (t_end / t_start) ** (1.0 / max(1, n_iter))
    current = np.asarray(start, dtype=int).copy()
    cur_val = scorer(current)
    best, best_val = current.copy(), cur_val
    temp = t_start
    n = current.size
    for _ in range(n_iter):
        a, b = rng.integers(n, size=2)
        if current[a] == current[b]:
            temp *= cooling
            continue
        current[a], current[b] = current[b], current[a]
        val = scorer(current)
        if val >= cur_val or rng.random() < math.exp((val - cur_val) / temp):
            cur_val = val
            if val > best_val:
                best, best_val = current.copy(), val
        else:
            current[a], current[b] = current[b], current[a]
        temp *= cooling
    return best, best_val


def assign_patterns(zones, lib: LoadPatternLibrary, seed=0, same_cluster=SAME_CLUSTER_DISTANCE,
                    exhaustive_limit=EXHAUSTIVE_LIMIT, n_iter=20_000) -> ZoneAssignment:
    """Assign one pattern per zone maximizing the pair-score entropy.

    Exhaustive search is used when the number of feasible assignments is at
    most ``exhaustive_limit``; ties go to the lexicographically smallest
    label vector. Otherwise annealing runs from the greedy baseline, so the
    result is never worse than that baseline.
    """
    zones = list(zones)
    if not zones:
        raise ValidationError("need at least one zone")
    counts = target_counts(len(zones), lib.probabilities)
    if counts.sum() != len(zones) or np.any(counts < 0):
        raise InfeasibleError(f"infeasible pattern counts {counts.tolist()} for {len(zones)} zones")
    zone_dist = pairwise_distances([z.centroid for z in zones], [z.centroid for z in zones])
    scorer = _Scorer(zone_dist, pattern_distance_matrix(lib.patterns, same_cluster))
    if multinomial_count(counts) <= exhaustive_limit:
        labels, value = _exhaustive(scorer, counts)
        method = "exhaustive"
    else:
        start, _ = greedy_assignment(scorer, counts)
        labels, value = anneal(scorer, start, seed, n_iter=n_iter)
        method = "annealing"
    return ZoneAssignment(zone_ids=tuple(z.id for z in zones), labels=np.asarray(labels, dtype=int),
                          counts=counts, objective_value=float(value), method=method)


class PatternAssigner(BaseEstimator):
    """Estimator wrapper around :func:`assign_patterns`.

    ``fit(zones, library)`` stores ``assignment_``, ``labels_`` and
    ``objective_``.
    """

    def __init__(self, random_state=0, same_cluster_distance=SAME_CLUSTER_DISTANCE,
                 exhaustive_limit=EXHAUSTIVE_LIMIT, n_iter=20_000):
        self.random_state = random_state
        self.same_cluster_distance = same_cluster_distance
        self.exhaustive_limit = exhaustive_limit
        self.n_iter = n_iter

    def fit(self, zones, library):
        self.assignment_ = assign_patterns(zones, library, self.random_state,
                                           self.same_cluster_distance, self.exhaustive_limit,
                                           self.n_iter)
        self.labels_ = self.assignment_.labels
        self.objective_ = self.assignment_.objective_value
        return self

    def fit_predict(self, zones, library):
        return self.fit(zones, library).labels_
