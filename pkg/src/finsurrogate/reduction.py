"""Weighted and unweighted PCA on 30-value skeleton vectors."""

from __future__ import annotations

import json

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

MODES = ("weighted", "unweighted")


def abs_pearson(X, y):
    """|corr(X[:, j], y)| per column; 0 where either side is constant."""
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt(np.sum(Xc**2, axis=0))
    sy = np.sqrt(np.sum(yc**2))
    tol = 1e-12
    ok = (sx > tol * np.maximum(1.0, np.abs(X).max(axis=0))) & (sy > tol * max(1.0, float(np.abs(y).max())))
    r = np.zeros(X.shape[1])
    r[ok] = np.abs(Xc[:, ok].T @ yc) / (sx[ok] * sy)
    return np.minimum(r, 1.0)


class PcaReducer(BaseEstimator, TransformerMixin):
    """Centre, rescale and project skeleton vectors onto their top principal axes.

    In ``unweighted`` mode every dimension is scaled to unit standard
    deviation. In ``weighted`` mode the target standard deviation of each
    dimension is its absolute Pearson correlation with the normalized thrust,
    so ``fit`` needs ``y``. Dimensions without a defined correlation (or with
    zero variance) get scale 0.

    Attributes
    ----------
    mean_ : (d,) array
    scale_ : (d,) array
        Multiplier applied after centring.
    components_ : (d, k) array
        Orthonormal principal axes, largest-|loading| entry of each positive.
    component_std_ : (k,) array
    explained_variance_ : (d,) array
        All eigenvalues of the scaled covariance, descending.
    """

    def __init__(self, mode="weighted", n_components=4):
        self.mode = mode
        self.n_components = n_components

    def fit(self, X, y=None):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        X = check_array(X, dtype=np.float64)
        n, d = X.shape
        k = self.n_components
        if k > d:
            raise ValueError(f"n_components={k} exceeds the input dimension {d}")
        if n < k + 1:
            raise ValueError(f"need at least {k + 1} samples for {k} components, got {n}")
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        std = Xc.std(axis=0)
        live = std > 1e-12 * np.maximum(1.0, np.abs(self.mean_))
        if self.mode == "weighted":
            if y is None:
                raise ValueError("weighted PCA needs the normalized thrust as y")
            y = np.asarray(y, dtype=float).ravel()
            if len(y) != n:
                raise ValueError("X and y have different lengths")
            target = abs_pearson(X, y)
        else:
            target = np.ones(d)
        self.weights_ = target
        self.scale_ = np.where(live, target / np.where(live, std, 1.0), 0.0)
        Z = Xc * self.scale_
        cov = Z.T @ Z / n
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order]
        lead = np.argmax(np.abs(evecs), axis=0)
        evecs = evecs * np.sign(evecs[lead, np.arange(d)])
        self.explained_variance_ = evals
        self.all_components_ = evecs
        self.components_ = np.ascontiguousarray(evecs[:, :k])
        self.component_std_ = np.sqrt(evals[:k])
        self.n_features_in_ = d
        return self

    def _check(self):
        if not hasattr(self, "components_"):
            raise NotFittedError("PcaReducer is not fitted")

    def transform(self, X):
        self._check()
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} values per row, got {X.shape[-1]}")
        return ((X - self.mean_) * self.scale_) @ self.components_

    def inverse_transform(self, Y):
        """Map scores back to skeleton space; exact only where ``scale_ != 0``."""
        self._check()
        Z = np.asarray(Y, dtype=float) @ self.components_.T
        inv = np.where(self.scale_ != 0, 1.0 / np.where(self.scale_ != 0, self.scale_, 1.0), 0.0)
        return Z * inv + self.mean_

    def explained_ratio(self, k=None):
        self._check()
        k = self.n_components if k is None else k
        total = self.explained_variance_.sum()
        return float(self.explained_variance_[:k].sum() / total) if total > 0 else 0.0

    def reconstruction_error(self, X):
        """Mean squared residual (in scaled space) left after projecting on the top axes."""
        self._check()
        Z = (np.asarray(X, dtype=float) - self.mean_) * self.scale_
        R = Z - (Z @ self.components_) @ self.components_.T
        return float(np.sum(R**2) / len(Z))

    def to_dict(self):
        self._check()
        return {
            "mode": self.mode,
            "k": self.n_components,
            "means": self.mean_.tolist(),
            "scales": self.scale_.tolist(),
            "weights": self.weights_.tolist(),
            "axes": self.components_.tolist(),
            "stds": self.component_std_.tolist(),
            "eigenvalues": self.explained_variance_.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        r = cls(mode=d["mode"], n_components=int(d["k"]))
        r.mean_ = np.array(d["means"], dtype=float)
        r.scale_ = np.array(d["scales"], dtype=float)
        r.weights_ = np.array(d.get("weights", np.ones_like(r.mean_)), dtype=float)
        r.components_ = np.array(d["axes"], dtype=float).reshape(len(r.mean_), -1)
        r.component_std_ = np.array(d["stds"], dtype=float)
        r.explained_variance_ = np.array(d.get("eigenvalues", r.component_std_**2), dtype=float)
        r.n_features_in_ = len(r.mean_)
        return r

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_pca(skeletons, thrusts=None, mode="weighted", k=4):
    return PcaReducer(mode=mode, n_components=k).fit(skeletons, thrusts)


def project(reducer, skeleton):
    return reducer.transform(skeleton)
