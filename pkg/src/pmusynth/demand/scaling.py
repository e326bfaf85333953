"""Normalization of minutely load windows against their endpoint line."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from ..exceptions import DegenerateInputError, ValidationError


def endpoint_line(first, last, n):
    steps = np.arange(n, dtype=float)
    return (last - first) / (n - 1) * steps + first


def scale_day_hour(raw) -> np.ndarray:
    """Divide a window of minutely loads by the line joining its endpoints.

    The first and last entries of the result are exactly 1.

    Raises
    ------
    DegenerateInputError
        If the endpoint line is nonpositive at any minute.
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("a load window needs at least 2 minutes")
    base = endpoint_line(x[0], x[-1], x.size)
    bad = np.flatnonzero(base <= 0)
    if bad.size:
        raise DegenerateInputError(
            f"nonpositive baseline at minute {int(bad[0]) + 1} (value {base[bad[0]]:.6g})")
    scaled = x / base
    # the endpoints divide by themselves; keep them exact
    scaled[0] = 1.0
    scaled[-1] = 1.0
    return scaled


class MinuteLoadScaler(TransformerMixin, BaseEstimator):
    """Stateless transformer applying :func:`scale_day_hour` row-wise."""

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = check_array(X)
        return np.vstack([scale_day_hour(row) for row in X])
