"""Wind speed variation statistics from high-resolution history."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError


def linear_baseline(first, last, n):
    """Line through ``(1, first)`` and ``(n, last)`` evaluated at 1..n."""
    steps = np.arange(n, dtype=float)
    return (last - first) / (n - 1) * steps + first


def detrend_and_difference(window):
    """Remove the endpoint line from a window and take first differences.

    Returns
    -------
    detrended : ndarray
        Window minus the line joining its endpoints; zero at both ends.
    increments : ndarray
        ``detrended[s] - detrended[s-1]`` with the first element set to 0.
    mean, sigma : float
        Mean and population standard deviation of ``increments``.
    """
    w = np.asarray(window, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValidationError("window needs at least 2 samples")
    detrended = w - linear_baseline(w[0], w[-1], w.size)
    detrended[0] = 0.0
    detrended[-1] = 0.0
    increments = np.empty_like(detrended)
    increments[0] = 0.0
    increments[1:] = np.diff(detrended)
    return detrended, increments, float(increments.mean()), float(increments.std())


@dataclass(frozen=True)
class SigmaDistribution:
    """Empirical distribution of per-window increment standard deviations."""

    samples: np.ndarray
    method: str = "empirical"
    lognormal_shape: float | None = None
    lognormal_scale: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.size == 0:
            raise ValidationError("sigma distribution needs at least one sample")
        if np.any(samples < 0):
            raise ValidationError("sigma samples must be nonnegative")
        object.__setattr__(self, "samples", samples)
        if self.method not in ("empirical", "lognormal"):
            raise ValidationError(f"unknown sigma sampling method {self.method!r}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.method == "lognormal" and self.lognormal_shape is not None:
            return float(stats.lognorm.rvs(self.lognormal_shape, scale=self.lognormal_scale,
                                           random_state=rng))
        return float(self.samples[rng.integers(self.samples.size)])


def rolling_windows(history, window_length, stride=1):
    h = np.asarray(history, dtype=float)
    if h.size < window_length:
        return np.empty((0, window_length))
    return sliding_window_view(h, window_length)[::stride]


def estimate_sigma_distribution(windows, window_length=None, stride=1, method="empirical"):
    """Collect one sigma per valid window.

    ``windows`` is either a 2-D array (one window per row) or a 1-D history
    that is cut into rolling windows of ``window_length`` samples every
    ``stride`` samples. Windows containing NaN are skipped.
    """
    arr = np.asarray(windows, dtype=float)
    if arr.ndim == 1:
        if window_length is None:
            raise ValidationError("window_length is required for a 1-D history")
        arr = rolling_windows(arr, window_length, stride)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise ValidationError("windows must be 2-D with at least 2 samples each")
    arr = arr[~np.isnan(arr).any(axis=1)]
    if arr.shape[0] == 0:
        raise ValidationError("no valid windows to estimate sigma from")
    # vectorized form of detrend_and_difference over rows
    n = arr.shape[1]
    steps = np.arange(n, dtype=float)
    detrended = arr - (arr[:, :1] + (arr[:, -1:] - arr[:, :1]) / (n - 1) * steps)
    detrended[:, 0] = 0.0
    detrended[:, -1] = 0.0
    increments = np.zeros_like(detrended)
    increments[:, 1:] = np.diff(detrended, axis=1)
    sigmas = increments.std(axis=1)
    shape = scale = None
    if method == "lognormal":
        positive = sigmas[sigmas > 0]
        if positive.size >= 2:
            shape, _, scale = stats.lognorm.fit(positive, floc=0)
    return SigmaDistribution(sigmas, method=method, lognormal_shape=shape, lognormal_scale=scale)


class SigmaEstimator(BaseEstimator):
    """Estimator wrapper: ``fit`` on a 1-D high-resolution speed history."""

    def __init__(self, window_length=21, stride=1, method="empirical"):
        self.window_length = window_length
        self.stride = stride
        self.method = method

    def fit(self, X, y=None):
        self.distribution_ = estimate_sigma_distribution(
            np.ravel(np.asarray(X, dtype=float)), self.window_length, self.stride, self.method)
        self.sigmas_ = self.distribution_.samples
        return self

    def sample(self, rng):
        check_is_fitted(self, "distribution_")
        return self.distribution_.draw(rng)
