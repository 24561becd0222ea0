"""Thrust surrogate: cycle featurization, scaling and a dense or recurrent net.

A :class:`SurrogateModel` consumes :class:`~finsurrogate.synthdata.StrokeCycle`
objects. Targets are thrust coefficients ``T / (0.5 rho v_tip^2 A)`` divided by
a thrust scale (the training-set std unless fixed up front), so every MSE it
reports is in normalized-thrust units.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import AxisFrame, FinShape, rotate_points
from .kinematics import SHAPE_CODES, Variant, build_cycle_features, feature_names
from .nn import DenseConfig, LstmConfig, config_from_dict, estimator_from_dict
from .preprocess import WATER_DENSITY, NormStats
from .reduction import PcaReducer
from .synthdata import reference_denominator, shape_table

CHECKPOINT_FORMAT = "finsurrogate-model"
CHECKPOINT_VERSION = 1

ARCHITECTURES = ("dense", "recurrent")


class ShapeLookup:
    """Flat skeletons and reference areas for every fin the model knows."""

    def __init__(self, shapes=None, frame=None, rho=WATER_DENSITY):
        self.frame = AxisFrame() if frame is None else frame
        self.rho = rho
        self.table = shape_table(shapes, self.frame)

    def info(self, name):
        try:
            return self.table[name]
        except KeyError:
            raise KeyError(f"unknown fin shape {name!r}; known: {sorted(self.table)}") from None

    def skeleton_series(self, cycle):
        """``(T, 30)`` rotated strip centroids along the cycle."""
        pts = rotate_points(self.info(cycle.shape).flat.coms, cycle.stroke_angle, cycle.pitch_angle)
        return pts.reshape(len(cycle), -1)

    def coefficients(self, cycle):
        return cycle.thrust / reference_denominator(self.info(cycle.shape), cycle.setting, self.rho)


class SurrogateModel(BaseEstimator):
    """One of the four input variants on a dense or recurrent network.

    Parameters
    ----------
    variant : {"BASELINE", "FP", "RFP", "WFP"}
    architecture : {"dense", "recurrent"}
    config : DenseConfig or LstmConfig, optional
        Defaults to the large tuned configuration for the architecture.
    n_components, pca_mode : reduced skeleton size and PCA weighting (WFP only).
    shapes : sequence of FinShape, optional
        Fins referenced by the cycles; the builtin three by default.
    frame : AxisFrame, optional
    rho : float
    thrust_scale : float, optional
        Fixed divisor for thrust coefficients. When ``None`` the population
        std of the training coefficients is used.
    """

    def __init__(self, variant="FP", architecture="dense", config=None, n_components=4,
                 pca_mode="weighted", shapes=None, frame=None, rho=WATER_DENSITY, thrust_scale=None,
                 verbose=0):
        self.variant = variant
        self.architecture = architecture
        self.config = config
        self.n_components = n_components
        self.pca_mode = pca_mode
        self.shapes = shapes
        self.frame = frame
        self.rho = rho
        self.thrust_scale = thrust_scale
        self.verbose = verbose

    # -- helpers ------------------------------------------------------------------

    @property
    def recurrent(self):
        return self.architecture == "recurrent"

    def _config(self):
        if self.config is not None:
            return self.config
        return LstmConfig() if self.recurrent else DenseConfig()

    def _lookup(self):
        if not hasattr(self, "lookup_"):
            self.lookup_ = ShapeLookup(self.shapes, self.frame, self.rho)
        return self.lookup_

    def _raw_features(self, cycle):
        lk = self._lookup()
        v = Variant(self.variant)
        skel = lk.skeleton_series(cycle) if v is not Variant.BASELINE else None
        reduced = self.reducer_.transform(skel) if v is Variant.WFP else None
        code = SHAPE_CODES.get(cycle.shape) if v is Variant.BASELINE else None
        if v is Variant.BASELINE and code is None:
            raise KeyError(f"no categorical code for fin {cycle.shape!r}")
        return build_cycle_features(v, cycle.kinematics, cycle.setting, skel, reduced, code, self.recurrent)

    def targets(self, cycle):
        return self._lookup().coefficients(cycle) / self.thrust_scale_

    def _design(self, cycles):
        X = [self.norm_.transform(self._raw_features(c)) for c in cycles]
        y = [self.targets(c) for c in cycles]
        if self.recurrent:
            lengths = {len(x) for x in X}
            if len(lengths) > 1:
                raise ValueError(f"recurrent training needs equal-length cycles, got lengths {sorted(lengths)}")
            return np.stack(X), np.stack(y)
        return np.vstack(X), np.concatenate(y)

    # -- estimator API --------------------------------------------------------------

    def fit(self, cycles, val_cycles=None):
        """Fit scaling, optional PCA and the network on training cycles."""
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        variant = Variant(self.variant)
        cycles = list(cycles)
        if not cycles:
            raise ValueError("no training cycles")
        cfg = self._config()
        if cfg.architecture != self.architecture:
            raise ValueError(f"{type(cfg).__name__} does not configure a {self.architecture} model")
        lk = self._lookup()
        coeffs = [lk.coefficients(c) for c in cycles]
        if self.thrust_scale is None:
            self.thrust_scale_ = NormStats().fit_thrust(np.concatenate(coeffs)).thrust_scale_
        else:
            self.thrust_scale_ = float(self.thrust_scale)
        if variant is Variant.WFP:
            skel = np.vstack([lk.skeleton_series(c) for c in cycles])
            y = np.concatenate(coeffs) / self.thrust_scale_
            self.reducer_ = PcaReducer(self.pca_mode, self.n_components).fit(skel, y)
        raw = np.vstack([self._raw_features(c) for c in cycles])
        self.norm_ = NormStats().fit(raw)
        self.norm_.thrust_scale_ = self.thrust_scale_
        self.feature_names_ = list(feature_names(variant, self.recurrent, self.n_components))
        X, y = self._design(cycles)
        eval_set = self._design(list(val_cycles)) if val_cycles else None
        self.estimator_ = cfg.estimator(verbose=self.verbose)
        self.estimator_.fit(X, y, eval_set=eval_set)
        self.history_ = self.estimator_.history_
        return self

    def predict(self, cycles):
        """Normalized thrust predictions, one array per cycle."""
        cycles = list(cycles)
        if not cycles:
            return []
        if self.recurrent:
            by_len = {}
            for i, c in enumerate(cycles):
                by_len.setdefault(len(c), []).append(i)
            out = [None] * len(cycles)
            for idx in by_len.values():
                X = np.stack([self.norm_.transform(self._raw_features(cycles[i])) for i in idx])
                pred = self.estimator_.predict(X)
                for j, i in enumerate(idx):
                    out[i] = pred[j]
            return out
        X = [self.norm_.transform(self._raw_features(c)) for c in cycles]
        pred = self.estimator_.predict(np.vstack(X))
        bounds = np.cumsum([0] + [len(x) for x in X])
        return [pred[a:b] for a, b in zip(bounds[:-1], bounds[1:])]

    def cycle_mse(self, cycles):
        """Per-cycle MSE in normalized-thrust units."""
        cycles = list(cycles)
        preds = self.predict(cycles)
        return np.array([float(np.mean((p - self.targets(c)) ** 2)) for p, c in zip(preds, cycles)])

    def mse(self, cycles):
        """Sample-weighted MSE over all cycles."""
        cycles = list(cycles)
        preds = self.predict(cycles)
        err = np.concatenate([p - self.targets(c) for p, c in zip(preds, cycles)])
        return float(np.mean(err**2))

    # -- persistence ----------------------------------------------------------------

    def to_dict(self):
        lk = self._lookup()
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "architecture": self.architecture,
            "variant": Variant(self.variant).value,
            "config": self._config().to_dict(),
            "n_components": self.n_components,
            "pca_mode": self.pca_mode,
            "feature_names": self.feature_names_,
            "rho": self.rho,
            "frame": {"stroke_axis_offset": lk.frame.stroke_axis_offset,
                      "pitch_axis_offset": lk.frame.pitch_axis_offset},
            "shapes": [self._shape_dict(name) for name in sorted(lk.table)],
            "norm_stats": self.norm_.to_dict(),
            "reducer": self.reducer_.to_dict() if hasattr(self, "reducer_") else None,
            "estimator": self.estimator_.to_dict(),
        }

    def _shape_dict(self, name):
        if self.shapes is None:
            return {"name": name, "builtin": True}
        return next(s.to_dict() for s in self.shapes if s.name == name)

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != CHECKPOINT_FORMAT or "version" not in d:
            raise ValueError("not a surrogate model checkpoint")
        if d["version"] > CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {d['version']} is newer than supported {CHECKPOINT_VERSION}")
        custom = [s for s in d["shapes"] if not s.get("builtin")]
        shapes = None if not custom else tuple(FinShape(tuple(map(tuple, s["vertices"])), s["name"]) for s in custom)
        m = cls(variant=d["variant"], architecture=d["architecture"],
                config=config_from_dict(d["architecture"], d["config"]), n_components=d["n_components"],
                pca_mode=d["pca_mode"], shapes=shapes, frame=AxisFrame(**d["frame"]), rho=d["rho"])
        m.norm_ = NormStats.from_dict(d["norm_stats"])
        m.thrust_scale_ = m.norm_.thrust_scale_
        if d.get("reducer"):
            m.reducer_ = PcaReducer.from_dict(d["reducer"])
        m.feature_names_ = d["feature_names"]
        m.estimator_ = estimator_from_dict(d["estimator"])
        m.history_ = m.estimator_.history_
        return m

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def train(model, train_set, val_set, config):
    """Set ``config`` on ``model``, fit it and return it (history in ``history_``)."""
    model.set_params(config=config, architecture=config.architecture)
    return model.fit(train_set, val_set)
