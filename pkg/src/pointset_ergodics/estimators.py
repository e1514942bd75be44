"""Estimator-style wrappers (``fit`` / ``get_params``) over the core functions.

``fit(P)`` accepts a :class:`PointSet` or an ``(n, d)`` array; results are
stored in trailing-underscore attributes.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .ergodics import birkhoff_average_mc
from .geometry import PointSet
from .groups import GroupSpec, window_sequence
from .patterns import Pattern, flc_enumerate, pattern_frequency

__all__ = ["check_pointset", "PatternFrequency", "BirkhoffAverage", "FLCClassifier"]


def check_pointset(X, r: Optional[float] = None) -> PointSet:
    """Return ``X`` as a :class:`PointSet`; arrays need ``r``."""
    if isinstance(X, PointSet):
        return X
    arr = check_array(X, dtype=None, ensure_min_samples=1)
    if r is None:
        raise ValueError("an array input needs the discreteness radius r")
    if not np.issubdtype(arr.dtype, np.number):
        raise ValueError("point coordinates must be numeric")
    return PointSet(arr, r)


class _WindowMixin:
    def _seq(self, dim: int):
        spec = GroupSpec.parse(self.group) if self.group else GroupSpec.translation(dim)
        return spec, window_sequence(self.window_shape, self.radii, spec.dim, spec.has_rotations)


class PatternFrequency(_WindowMixin, BaseEstimator):
    """Frequency of the class of ``pattern`` over a window sequence."""

    def __init__(self, pattern=None, group: Optional[str] = None, window_shape: str = "box",
                 radii: Sequence[float] = (8, 16, 32, 64), r: Optional[float] = None):
        self.pattern = pattern
        self.group = group
        self.window_shape = window_shape
        self.radii = radii
        self.r = r

    def fit(self, X, y=None):
        P = check_pointset(X, self.r)
        if self.pattern is None:
            raise ValueError("pattern is required")
        spec, seq = self._seq(P.dim)
        est = pattern_frequency(P, Pattern(np.asarray(self.pattern)), seq, spec)
        self.estimate_ = est.estimate
        self.ratios_ = np.asarray(est.ratios)
        self.counts_ = np.asarray(est.counts)
        self.truncated_ = np.asarray(est.truncated)
        self.result_ = est
        return self


class BirkhoffAverage(_WindowMixin, BaseEstimator):
    """Monte Carlo orbit average of a scanning function."""

    def __init__(self, function=None, group: Optional[str] = None, window_shape: str = "box",
                 radii: Sequence[float] = (32,), samples: int = 100_000, seed: int = 0,
                 r: Optional[float] = None):
        self.function = function
        self.group = group
        self.window_shape = window_shape
        self.radii = radii
        self.samples = samples
        self.seed = seed
        self.r = r

    def fit(self, X, y=None):
        P = X if not isinstance(X, (np.ndarray, list)) else check_pointset(X, self.r)
        base = getattr(P, "base", P)
        _, seq = self._seq(base.dim)
        res = birkhoff_average_mc(P, self.function, seq, self.samples, self.seed)
        self.averages_ = np.asarray(res.averages)
        self.stderrs_ = np.asarray(res.stderrs)
        self.estimate_ = res.averages[-1]
        self.result_ = res
        return self


class FLCClassifier(BaseEstimator):
    """FLC verdict from class counts of ball patterns in growing windows."""

    def __init__(self, V_radius: float = 1.2, n_windows: int = 4, group: Optional[str] = None,
                 r: Optional[float] = None):
        self.V_radius = V_radius
        self.n_windows = n_windows
        self.group = group
        self.r = r

    def fit(self, X, y=None):
        P = check_pointset(X, self.r)
        spec = GroupSpec.parse(self.group) if self.group else GroupSpec.translation(P.dim)
        res = flc_enumerate(P, self.V_radius, self.n_windows, spec)
        self.class_counts_ = np.asarray(res.class_counts)
        self.verdict_ = res.verdict
        self.result_ = res
        return self

    def predict(self, X=None):
        """``True`` when the fitted set looks FLC."""
        check_is_fitted(self, "verdict_")
        return self.verdict_
