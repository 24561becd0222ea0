"""Central finite-difference check of the hand-written backward passes."""

import numpy as np

from .dense import dense_backward, dense_forward, init_dense
from .lstm import init_lstm, lstm_backward, lstm_forward


def _net(architecture, config, rng):
    d = config["input_dim"]
    if architecture == "dense":
        params = init_dense(d, config.get("layers", 2), config.get("nodes", 8), rng)
        fwd, bwd = dense_forward, dense_backward
    elif architecture == "recurrent":
        params = init_lstm(d, config.get("hidden_units", 8), rng)
        # random biases so every gate path carries gradient
        params["b"] = rng.uniform(-0.5, 0.5, size=params["b"].shape)
        fwd, bwd = lstm_forward, lstm_backward
    else:
        raise ValueError(f"unknown architecture {architecture!r}")
    params["b_out"] = rng.uniform(-0.5, 0.5, size=1)
    return params, fwd, bwd


def mse_and_grads(params, fwd, bwd, X, y, dropout=0.0, mask_seed=None):
    rng = None if mask_seed is None else np.random.default_rng(mask_seed)
    training = dropout > 0
    out, cache = fwd(params, X, training, dropout, rng)
    err = out - y
    return float(np.mean(err**2)), bwd(params, cache, 2.0 * err / err.size)


def gradient_check(architecture, config, sample, step=1e-5, seed=0, floor=1e-6, params=None):
    """Largest relative gap between analytic and finite-difference gradients.

    Parameters
    ----------
    architecture : {"dense", "recurrent"}
    config : dict
        ``input_dim`` plus ``layers``/``nodes`` or ``hidden_units``; an
        optional ``dropout`` is checked with a frozen mask.
    sample : (X, y)
        Dense: ``(N, d)`` and ``(N,)``. Recurrent: ``(B, T, d)`` and ``(B, T)``.
    floor : float
        Lower bound on the denominator ``max(|analytic|, |numeric|)``.

    Returns
    -------
    float
    """
    rng = np.random.default_rng(seed)
    net, fwd, bwd = _net(architecture, config, rng)
    if params is not None:
        net = {k: np.array(v, dtype=float) for k, v in params.items()}
    X, y = (np.asarray(a, dtype=float) for a in sample)
    dropout = config.get("dropout", 0.0)
    _, grads = mse_and_grads(net, fwd, bwd, X, y, dropout, seed)
    worst = 0.0
    for name, p in net.items():
        flat = p.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp, _ = mse_and_grads(net, fwd, bwd, X, y, dropout, seed)
            flat[i] = orig - step
            lm, _ = mse_and_grads(net, fwd, bwd, X, y, dropout, seed)
            flat[i] = orig
            num = (lp - lm) / (2.0 * step)
            denom = max(abs(num), abs(g[i]), floor)
            worst = max(worst, abs(num - g[i]) / denom)
    return worst
