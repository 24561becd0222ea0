"""scikit-learn style regressors backed by the numpy dense and LSTM nets."""

from __future__ import annotations

import logging

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .dense import dense_backward, dense_forward, init_dense
from .lstm import init_lstm, lstm_backward, lstm_forward
from .optim import Adam

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def _streams(random_state):
    ss = np.random.SeedSequence(0 if random_state is None else int(random_state))
    return [np.random.default_rng(s) for s in ss.spawn(3)]


class _NetRegressor(BaseEstimator, RegressorMixin):
    """Shared Adam/MSE training loop; subclasses define the network."""

    architecture = None

    def _validate_hyper(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def fit(self, X, y, eval_set=None):
        """Train for ``epochs`` passes, keeping the last-epoch weights.

        ``eval_set=(X_val, y_val)`` adds a per-epoch validation MSE to
        ``history_``.
        """
        self._validate_hyper()
        X, y = self._check_xy(X, y)
        if eval_set is not None:
            Xv, yv = self._check_xy(*eval_set)
        rng_init, rng_shuffle, rng_drop = _streams(self.random_state)
        self.params_ = self._init(X.shape[-1], rng_init)
        self.n_features_in_ = X.shape[-1]
        opt = Adam(self.params_, self.learning_rate, weight_decay=self.weight_decay)
        self.history_ = {"train_mse": [], "val_mse": []}
        n = len(X)
        for epoch in range(self.epochs):
            order = rng_shuffle.permutation(n)
            total, count = 0.0, 0
            for bi, start in enumerate(range(0, n, self.batch_size)):
                idx = order[start:start + self.batch_size]
                out, cache = self._forward(X[idx], True, rng_drop)
                err = out - y[idx]
                loss = float(np.mean(err**2))
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
                grads = self._backward(cache, 2.0 * err / err.size)
                opt.step(self.params_, grads)
                total += loss * err.size
                count += err.size
            self.history_["train_mse"].append(total / max(count, 1))
            if eval_set is not None:
                self.history_["val_mse"].append(float(np.mean((self.predict(Xv) - yv) ** 2)))
            if self.verbose and (epoch % self.verbose == 0 or epoch == self.epochs - 1):
                log.info("%s epoch %d train %.5f val %s", self.architecture, epoch,
                         self.history_["train_mse"][-1],
                         f"{self.history_['val_mse'][-1]:.5f}" if eval_set is not None else "-")
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")

    def loss_and_grads(self, X, y, training=False, rng=None):
        """MSE loss on ``(X, y)`` and its gradient for the current parameters."""
        self._check_fitted()
        out, cache = self._forward(np.asarray(X, dtype=float), training, rng)
        err = out - np.asarray(y, dtype=float)
        return float(np.mean(err**2)), self._backward(cache, 2.0 * err / err.size)

    def n_parameters(self):
        self._check_fitted()
        return int(sum(v.size for v in self.params_.values()))

    def to_dict(self):
        self._check_fitted()
        return {
            "architecture": self.architecture,
            "hyperparameters": self.get_params(),
            "n_features_in": int(self.n_features_in_),
            "params": {k: v.tolist() for k, v in self.params_.items()},
            "history": self.history_,
        }

    @classmethod
    def from_dict(cls, d):
        est = cls(**d["hyperparameters"])
        est.n_features_in_ = d["n_features_in"]
        est.params_ = {k: np.array(v, dtype=float) for k, v in d["params"].items()}
        est.history_ = d.get("history", {"train_mse": [], "val_mse": []})
        return est


class DenseRegressor(_NetRegressor):
    """Instantaneous thrust regressor: ``layers`` tanh layers of ``nodes`` units.

    Parameters
    ----------
    layers, nodes : int
    dropout : float
        Inverted-dropout rate on hidden activations during training.
    learning_rate, batch_size, epochs : Adam settings.
    weight_decay : float
        Decoupled decay on weight matrices; 0 disables it.
    random_state : int
        Seeds initialisation, shuffling and dropout masks.
    """

    architecture = "dense"

    def __init__(self, layers=3, nodes=250, dropout=0.005, learning_rate=0.007, batch_size=32,
                 epochs=350, random_state=0, verbose=0, weight_decay=0.0):
        self.layers = layers
        self.nodes = nodes
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state
        self.verbose = verbose
        self.weight_decay = weight_decay

    def _check_xy(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(X):
            raise ValueError("X and y lengths differ")
        return X, y

    def _init(self, d, rng):
        if self.layers < 1 or self.nodes < 1:
            raise ValueError("layers and nodes must be >= 1")
        return init_dense(d, self.layers, self.nodes, rng)

    def _forward(self, X, training, rng):
        return dense_forward(self.params_, X, training, self.dropout, rng)

    def _backward(self, cache, dout):
        return dense_backward(self.params_, cache, dout)

    def predict(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = np.concatenate([dense_forward(self.params_, X[i:i + 8192])[0] for i in range(0, len(X), 8192)]) \
            if len(X) else np.empty(0)
        return out[0] if single else out


class LstmRegressor(_NetRegressor):
    """Whole-cycle thrust profile regressor; ``X`` is ``(n_cycles, T, d)``."""

    architecture = "recurrent"

    def __init__(self, hidden_units=200, dropout=0.005, learning_rate=1e-7, batch_size=4,
                 epochs=200, random_state=0, verbose=0, weight_decay=0.0):
        self.hidden_units = hidden_units
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state
        self.verbose = verbose
        self.weight_decay = weight_decay

    def _check_xy(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim != 3:
            raise ValueError(f"expected (n_sequences, T, d) input, got shape {X.shape}")
        if X.shape[1] == 0:
            raise ValueError("empty sequence")
        if not np.all(np.isfinite(X)):
            raise ValueError("input contains non-finite values")
        y = np.asarray(y, dtype=float)
        if y.shape != X.shape[:2]:
            raise ValueError(f"targets shape {y.shape} does not match sequences {X.shape[:2]}")
        return X, y

    def _init(self, d, rng):
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be >= 1")
        return init_lstm(d, self.hidden_units, rng)

    def _forward(self, X, training, rng):
        return lstm_forward(self.params_, X, training, self.dropout, rng)

    def _backward(self, cache, dout):
        return lstm_backward(self.params_, cache, dout)

    def predict(self, X):
        self._check_fitted()
        X = np.asarray(X, dtype=float)
        single = X.ndim == 2
        if single:
            X = X[None]
        if X.shape[-1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features per step, got {X.shape[-1]}")
        out = np.concatenate([lstm_forward(self.params_, X[i:i + 256])[0] for i in range(0, len(X), 256)])
        return out[0] if single else out


ESTIMATORS = {"dense": DenseRegressor, "recurrent": LstmRegressor}


def estimator_from_dict(d):
    return ESTIMATORS[d["architecture"]].from_dict(d)
