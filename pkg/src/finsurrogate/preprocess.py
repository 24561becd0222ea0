"""Thrust coefficients, z-score scaling and the binned thrust-noise metric."""

from __future__ import annotations

import json
import logging
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

log = logging.getLogger(__name__)

WATER_DENSITY = 1000.0


def thrust_coefficient(thrust, rho, v_ref, area):
    """``T / (0.5 rho v_ref^2 A)`` in SI units; works elementwise on arrays."""
    if not (rho > 0 and v_ref > 0 and area > 0):
        raise ValueError(f"rho, v_ref and area must be > 0 (got {rho}, {v_ref}, {area})")
    denom = 0.5 * rho * v_ref**2 * area
    if np.ndim(thrust):
        return np.asarray(thrust, dtype=float) / denom
    return float(thrust) / denom


def mean_tip_speed(stroke_amplitude_deg, flap_frequency, tip_radius_m):
    """Cycle-averaged tip speed (m/s) of ``A sin(2 pi f t)`` at radius ``r``.

    The mean of ``|A w cos(w t)|`` over a period is ``A w 2/pi = 4 A f``.
    """
    return 4.0 * math.radians(stroke_amplitude_deg) * flap_frequency * tip_radius_m


class NormStats(BaseEstimator, TransformerMixin):
    """Per-feature z-score statistics plus a divisor for thrust coefficients.

    ``transform`` maps ``x -> (x - mean_) / std_``. Constant features are kept
    with ``std_ = 1`` and listed in ``constant_features_``. ``thrust_scale_``
    is the population standard deviation of the training thrust coefficients,
    so that ``coeff / thrust_scale_`` has unit spread.
    """

    def __init__(self, constant_tol=1e-12):
        self.constant_tol = constant_tol

    def fit(self, X, thrust=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        const = std <= self.constant_tol * np.maximum(1.0, np.abs(self.mean_))
        if const.any():
            log.warning("constant input features %s scaled with std=1", np.flatnonzero(const).tolist())
        self.std_ = np.where(const, 1.0, std)
        self.constant_features_ = np.flatnonzero(const).tolist()
        if thrust is not None:
            self.fit_thrust(thrust)
        return self

    def fit_thrust(self, thrust):
        thrust = np.asarray(thrust, dtype=float).ravel()
        if thrust.size == 0:
            raise ValueError("cannot fit thrust scale on an empty set")
        s = float(thrust.std())
        self.thrust_scale_ = s if s > 0 else 1.0
        return self

    def _check(self):
        if not hasattr(self, "mean_"):
            raise NotFittedError("NormStats is not fitted")

    def transform(self, X):
        self._check()
        X = np.asarray(X, dtype=float)
        return (X - self.mean_) / self.std_

    def inverse_transform(self, X):
        self._check()
        return np.asarray(X, dtype=float) * self.std_ + self.mean_

    def scale_thrust(self, coeff):
        return np.asarray(coeff, dtype=float) / self.thrust_scale_

    def unscale_thrust(self, y):
        return np.asarray(y, dtype=float) * self.thrust_scale_

    def to_dict(self):
        self._check()
        return {
            "mean": self.mean_.tolist(),
            "std": self.std_.tolist(),
            "constant_features": list(self.constant_features_),
            "thrust_scale": getattr(self, "thrust_scale_", None),
        }

    @classmethod
    def from_dict(cls, d):
        ns = cls()
        ns.mean_ = np.array(d["mean"], dtype=float)
        ns.std_ = np.array(d["std"], dtype=float)
        ns.constant_features_ = list(d.get("constant_features", []))
        if d.get("thrust_scale") is not None:
            ns.thrust_scale_ = float(d["thrust_scale"])
        return ns

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_norm_stats(features, thrust_coeffs=None):
    if len(features) == 0:
        raise ValueError("cannot fit normalization statistics on an empty dataset")
    return NormStats().fit(features, thrust_coeffs)


def thrust_deviation(cycles, thrust=None, n_bins=100):
    """ThrustDev of a group of cycles sharing one kinematic-shape setting.

    ``cycles`` are objects with ``stroke_angle``, ``stroke_state`` and
    ``thrust`` arrays. Pass ``thrust`` (one array per cycle) to score other
    values than ``cycle.thrust``, typically the normalized coefficients.
    """
    if len(cycles) < 2:
        raise ValueError("thrust deviation needs at least two cycles")
    if thrust is None:
        thrust = [c.thrust for c in cycles]
    return binned_deviation([c.stroke_angle for c in cycles], [c.stroke_state for c in cycles],
                            thrust, n_bins)


def binned_deviation(stroke, state, thrust, n_bins=100):
    """Mean per-cell spread of normalized thrust across cycles.

    Parameters
    ----------
    stroke, state, thrust : sequences of 1-D arrays
        One entry per cycle: stroke angle, stroke-state flag and normalized
        thrust coefficient at each sample. All cycles belong to one
        kinematic-shape setting.
    n_bins : int
        Equal-width intervals over the group's stroke range; cells are split
        again by upstroke/downstroke, giving ``2 * n_bins`` cells.

    Each cycle contributes one value per cell, the mean of its samples
    there, and a cell scores the population std of those values. Cells
    reached by fewer than two cycles contribute zero but still count in the
    denominator.
    """
    if len(thrust) < 2:
        raise ValueError("thrust deviation needs at least two cycles")
    lengths = [len(c) for c in thrust]
    s = np.concatenate([np.asarray(c, dtype=float) for c in stroke])
    up = np.concatenate([np.asarray(c) for c in state])
    y = np.concatenate([np.asarray(c, dtype=float) for c in thrust])
    if not (len(s) == len(up) == len(y)):
        raise ValueError("stroke, state and thrust lengths differ")
    n_cells = 2 * n_bins
    cells = np.split(cell_index(s, up, n_bins), np.cumsum(lengths)[:-1])
    ys = np.split(y, np.cumsum(lengths)[:-1])
    means = np.stack([cell_means(c, v, n_cells) for c, v in zip(cells, ys)])
    return float(cell_spread(means).sum() / n_cells)


def cell_index(stroke, state, n_bins=100):
    """Cell of each sample: stroke bin for upstroke, ``bin + n_bins`` for downstroke."""
    s = np.asarray(stroke, dtype=float)
    up = np.asarray(state).astype(bool)
    lo, hi = s.min(), s.max()
    if hi > lo:
        idx = np.clip(((s - lo) / (hi - lo) * n_bins).astype(np.int64), 0, n_bins - 1)
    else:
        idx = np.zeros(len(s), dtype=np.int64)
    return idx + n_bins * (~up)


def cell_means(cell, y, n_cells):
    """Mean of ``y`` in each cell for one cycle; NaN where the cycle has no sample."""
    cnt = np.bincount(cell, minlength=n_cells)
    tot = np.bincount(cell, weights=y, minlength=n_cells)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, tot / cnt, np.nan)


def cell_spread(means):
    """Population std over axis 0, ignoring NaN; 0 where fewer than two values.

    Columns whose values are all equal give exactly 0.
    """
    means = np.asarray(means, dtype=float)
    ok = ~np.isnan(means)
    n = ok.sum(axis=0)
    filled = np.where(ok, means, 0.0)
    mu = filled.sum(axis=0) / np.maximum(n, 1)
    var = (np.where(ok, means - mu, 0.0) ** 2).sum(axis=0) / np.maximum(n, 1)
    hi = np.where(ok, means, -np.inf).max(axis=0)
    lo = np.where(ok, means, np.inf).min(axis=0)
    return np.where((n >= 2) & (hi > lo), np.sqrt(var), 0.0)
