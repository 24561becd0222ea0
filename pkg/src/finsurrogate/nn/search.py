"""Random hyperparameter search over box ranges."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from ..rng import derive_seed, substream
from .config import DenseConfig, LstmConfig

# name: (low, high, rule); "int" is uniform over integers, "log" is log-uniform
DENSE_SPACE = {
    "layers": (2, 5, "int"),
    "nodes": (50, 350, "int"),
    "dropout": (0.0, 0.2, "uniform"),
    "batch_size": (4, 64, "int"),
    "learning_rate": (1e-3, 1e-2, "log"),
}

LSTM_SPACE = {
    "hidden_units": (150, 500, "int"),
    "dropout": (0.0, 0.2, "uniform"),
    "batch_size": (4, 64, "int"),
    "learning_rate": (1e-9, 1e-4, "log"),
}


@dataclass
class Trial:
    index: int
    params: dict
    val_mse: float
    train_mse: float
    seed: int


def sample_params(space, rng):
    out = {}
    for name, (lo, hi, rule) in space.items():
        if rule == "int":
            out[name] = int(rng.integers(int(lo), int(hi) + 1))
        elif rule == "log":
            out[name] = float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
        elif rule == "uniform":
            out[name] = float(rng.uniform(lo, hi))
        else:
            raise ValueError(f"unknown sampling rule {rule!r} for {name}")
    return out


def _run_trial(i, architecture, space, base, fit_fn, seed):
    params = sample_params(space, substream(seed, "search", i))
    cfg_cls = DenseConfig if architecture == "dense" else LstmConfig
    trial_seed = derive_seed(seed, "trial", i)
    cfg = cfg_cls(**{**base, **params, "seed": trial_seed})
    train_mse, val_mse = fit_fn(cfg)
    return Trial(i, params, float(val_mse), float(train_mse), trial_seed)


def random_search(fit_fn, architecture="dense", space=None, n_trials=200, seed=0, base=None, n_jobs=1):
    """Sample ``n_trials`` configurations and rank them by validation MSE.

    ``fit_fn(config) -> (train_mse, val_mse)`` trains one model. Every trial
    draws from its own seeded substream, so the ranking does not depend on
    ``n_jobs``.
    """
    if space is None:
        space = DENSE_SPACE if architecture == "dense" else LSTM_SPACE
    base = dict(base or {})
    if n_jobs == 1:
        trials = [_run_trial(i, architecture, space, base, fit_fn, seed) for i in range(n_trials)]
    else:
        trials = Parallel(n_jobs=n_jobs)(
            delayed(_run_trial)(i, architecture, space, base, fit_fn, seed) for i in range(n_trials))
    key = [(t.val_mse if np.isfinite(t.val_mse) else math.inf, t.index) for t in trials]
    return [t for _, t in sorted(zip(key, trials), key=lambda kt: kt[0])]
