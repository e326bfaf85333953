"""Wind turbine power production curve.

Sigmoid rise up to the limiting speed, polynomial drop-off up to the furling
speed, zero beyond. The sigmoid is not forced to 1 at ``v_lim``; the small
jump there is inherent to the model and is left as is.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..exceptions import ValidationError


@dataclass(frozen=True)
class TurbineCurve:
    v_cutin: float = 3.0
    v_mid: float = 8.0
    v_rated: float = 12.0
    v_lim: float = 20.0
    v_furl: float = 25.0
    beta: float = 0.95
    alpha3: float = 2.0

    def __post_init__(self):
        if not (0 <= self.v_cutin < self.v_mid < self.v_rated <= self.v_lim < self.v_furl):
            raise ValidationError(
                "turbine curve requires 0 <= v_cutin < v_mid < v_rated <= v_lim < v_furl")
        if not (0.5 < self.beta < 1.0):
            raise ValidationError(f"beta must lie in (0.5, 1), got {self.beta}")
        if not self.alpha3 > 0:
            raise ValidationError("alpha3 must be positive")

    @property
    def alpha1(self) -> float:
        return (self.v_rated - self.v_mid) / math.log(self.beta / (1.0 - self.beta))

    @property
    def alpha2(self) -> float:
        return (self.v_furl - self.v_lim) ** (-self.alpha3)

    def to_dict(self) -> dict:
        return asdict(self)


def power_output(curve: TurbineCurve, v):
    """Per-unit turbine output at wind speed ``v`` (scalar or array)."""
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0):
        raise ValidationError("wind speed must be nonnegative")
    # 1 - (1 + exp(x))^-1 == expit(x), without overflow at large speeds
    rise = expit((v_arr - curve.v_mid) / curve.alpha1)
    over = np.clip(v_arr - curve.v_lim, 0.0, None)
    drop = 1.0 - curve.alpha2 * over ** curve.alpha3
    p = np.where(v_arr <= curve.v_lim, rise,
                 np.where(v_arr <= curve.v_furl, drop, 0.0))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def farm_power_series(farm, speeds, curve: TurbineCurve) -> np.ndarray:
    """MW output of ``farm`` for each speed sample."""
    return farm.rated_mw * np.asarray(power_output(curve, np.asarray(speeds, dtype=float)))


class WindPowerCurve(TransformerMixin, BaseEstimator):
    """Transformer mapping wind speeds (m/s) to per-unit turbine output.

    Parameters mirror :class:`TurbineCurve`. ``fit`` only validates the
    parameters and exposes the derived shape constants ``alpha1_`` and
    ``alpha2_``.
    """

    def __init__(self, v_cutin=3.0, v_mid=8.0, v_rated=12.0, v_lim=20.0, v_furl=25.0,
                 beta=0.95, alpha3=2.0):
        self.v_cutin = v_cutin
        self.v_mid = v_mid
        self.v_rated = v_rated
        self.v_lim = v_lim
        self.v_furl = v_furl
        self.beta = beta
        self.alpha3 = alpha3

    def fit(self, X=None, y=None):
        self.curve_ = TurbineCurve(self.v_cutin, self.v_mid, self.v_rated, self.v_lim,
                                   self.v_furl, self.beta, self.alpha3)
        self.alpha1_ = self.curve_.alpha1
        self.alpha2_ = self.curve_.alpha2
        return self

    def transform(self, X):
        check_is_fitted(self, "curve_")
        return power_output(self.curve_, np.asarray(X, dtype=float))
