"""K-means extraction of characteristic minutely load variation patterns."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import ValidationError

SAME_CLUSTER_DISTANCE = 1e-6


@dataclass(frozen=True)
class LoadPatternLibrary:
    patterns: np.ndarray       # (K, M)
    probabilities: np.ndarray  # (K,)
    source_count: int
    labels: np.ndarray | None = None
    inertia: float = float("nan")

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValidationError("pattern probabilities must be nonnegative and sum to 1")
        if np.asarray(self.patterns).shape[0] != p.size:
            raise ValidationError("one probability per pattern is required")

    @property
    def K(self) -> int:
        return int(self.probabilities.size)

    @property
    def M(self) -> int:
        return int(self.patterns.shape[1])

    def to_dict(self) -> dict:
        return {"K": self.K, "M": self.M, "source_count": int(self.source_count),
                "probabilities": [float(p) for p in self.probabilities],
                "patterns": [[float(v) for v in row] for row in self.patterns],
                "inertia": float(self.inertia)}

    @classmethod
    def from_dict(cls, doc: dict) -> "LoadPatternLibrary":
        return cls(patterns=np.asarray(doc["patterns"], dtype=float),
                   probabilities=np.asarray(doc["probabilities"], dtype=float),
                   source_count=int(doc["source_count"]), inertia=float(doc.get("inertia", "nan")))


def _sq_dists(X, centers):
    return ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        idx = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centers[i] = X[idx]
        closest = np.minimum(closest, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _lloyd(X, centers, max_iter, tol):
    centers = centers.copy()
    for _ in range(max_iter):
        d2 = _sq_dists(X, centers)
        labels = d2.argmin(axis=1)
        new = centers.copy()
        for j in range(centers.shape[0]):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(axis=0)
        empty = [j for j in range(centers.shape[0]) if not (labels == j).any()]
        if empty:
            # re-seed empty clusters from the samples farthest from their centroid
            far = np.argsort(-d2[np.arange(X.shape[0]), labels], kind="stable")
            for j, idx in zip(empty, far):
                new[j] = X[idx]
        shift = ((new - centers) ** 2).sum()
        centers = new
        if not empty and shift <= tol:
            break
    d2 = _sq_dists(X, centers)
    labels = d2.argmin(axis=1)
    return centers, labels, float(d2[np.arange(X.shape[0]), labels].sum())


def kmeans(X, n_clusters, seed=0, n_init=10, max_iter=300, tol=1e-8):
    """Lloyd's algorithm with k-means++ seeding, best of ``n_init`` runs.

    ``tol`` is relative to the mean per-feature variance of ``X``.
    Returns ``(centers, labels, inertia)``.
    """
    X = np.asarray(X, dtype=float)
    if n_clusters > X.shape[0]:
        raise ValidationError(f"K={n_clusters} exceeds the number of samples D={X.shape[0]}")
    if n_clusters < 1:
        raise ValidationError("K must be at least 1")
    rng = np.random.default_rng(seed)
    abs_tol = tol * float(np.mean(X.var(axis=0))) if X.shape[0] > 1 else 0.0
    best = None
    for _ in range(n_init):
        run = _lloyd(X, _kmeans_pp(X, n_clusters, rng), max_iter, abs_tol)
        if best is None or run[2] < best[2]:
            best = run
    return best


def extract_patterns(samples, K=4, seed=0, n_init=10, max_iter=300, tol=1e-8) -> LoadPatternLibrary:
    """Cluster scaled load windows into ``K`` patterns with their frequencies.

    Patterns are ordered by decreasing probability (ties by first member).
    """
    X = np.asarray([np.asarray(s, dtype=float) for s in samples])
    if X.ndim != 2:
        raise ValidationError("all samples must have the same length M")
    centers, labels, inertia = kmeans(X, K, seed=seed, n_init=n_init, max_iter=max_iter, tol=tol)
    counts = np.bincount(labels, minlength=K)
    first_member = [int(np.flatnonzero(labels == j)[0]) if counts[j] else X.shape[0] for j in range(K)]
    order = sorted(range(K), key=lambda j: (-counts[j], first_member[j]))
    remap = np.empty(K, dtype=int)
    remap[order] = np.arange(K)
    return LoadPatternLibrary(patterns=centers[order], probabilities=counts[order] / X.shape[0],
                              source_count=X.shape[0], labels=remap[labels], inertia=inertia)


def cluster_distance(lib: LoadPatternLibrary, k: int, k2: int,
                     same_cluster: float = SAME_CLUSTER_DISTANCE) -> float:
    """Euclidean distance between two pattern centroids; ``same_cluster`` if k == k2."""
    if not (0 <= k < lib.K and 0 <= k2 < lib.K):
        raise ValidationError(f"cluster index out of range: {k}, {k2}")
    if k == k2:
        return same_cluster
    return float(np.linalg.norm(lib.patterns[k] - lib.patterns[k2]))


class LoadPatternClusterer(ClusterMixin, BaseEstimator):
    """Estimator form of :func:`extract_patterns`.

    After ``fit``: ``cluster_centers_``, ``probabilities_``, ``labels_``,
    ``inertia_`` and ``library_``.
    """

    def __init__(self, n_clusters=4, random_state=0, n_init=10, max_iter=300, tol=1e-8):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.n_init = n_init
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y=None):
        X = check_array(X)
        self.library_ = extract_patterns(X, self.n_clusters, self.random_state, self.n_init,
                                         self.max_iter, self.tol)
        self.cluster_centers_ = self.library_.patterns
        self.probabilities_ = self.library_.probabilities
        self.labels_ = self.library_.labels
        self.inertia_ = self.library_.inertia
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(X)
        return _sq_dists(X, self.cluster_centers_).argmin(axis=1)
