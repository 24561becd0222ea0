"""Many-to-many LSTM regressor: one scalar prediction per time step.

Gate layout inside the stacked weight matrices is ``[input, forget, output,
candidate]``; gates use the logistic function, candidate and cell output use
tanh. Hidden and cell states start at zero. Dropout, when training, masks the
hidden state fed to the output head.
"""

import numpy as np


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_lstm(input_dim, hidden, rng):
    lim = 1.0 / np.sqrt(hidden)
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate starts open
    return {
        "W": rng.uniform(-lim, lim, size=(input_dim, 4 * hidden)),
        "U": rng.uniform(-lim, lim, size=(hidden, 4 * hidden)),
        "b": b,
        "W_out": rng.uniform(-lim, lim, size=hidden),
        "b_out": np.zeros(1),
    }


def lstm_forward(params, X, training=False, dropout=0.0, rng=None):
    """Run sequences ``X`` of shape ``(B, T, d)``; returns ``(B, T)`` and a cache."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    B, T, d = X.shape
    if T == 0:
        raise ValueError("empty sequence")
    if d != params["W"].shape[0]:
        raise ValueError(f"expected {params['W'].shape[0]} inputs per step, got {d}")
    H = params["U"].shape[0]
    xw = X @ params["W"] + params["b"]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.empty((B, T, H))
    cs = np.empty((B, T, H))
    gates = np.empty((B, T, 4 * H))
    U = params["U"]
    for t in range(T):
        z = xw[:, t] + h @ U
        g = np.empty_like(z)
        g[:, :3 * H] = _sigmoid(z[:, :3 * H])
        g[:, 3 * H:] = np.tanh(z[:, 3 * H:])
        c = g[:, H:2 * H] * c + g[:, :H] * g[:, 3 * H:]
        h = g[:, 2 * H:3 * H] * np.tanh(c)
        gates[:, t] = g
        cs[:, t] = c
        hs[:, t] = h
    if training and dropout > 0:
        mask = (rng.random(hs.shape) >= dropout) / (1.0 - dropout)
        head_in = hs * mask
    else:
        mask = None
        head_in = hs
    out = head_in @ params["W_out"] + params["b_out"][0]
    return out, (X, hs, cs, gates, mask, head_in)


def lstm_backward(params, cache, dout):
    """Backpropagation through time for ``sum(dout * out)``."""
    X, hs, cs, gates, mask, head_in = cache
    B, T, H = hs.shape
    U = params["U"]
    grads = {
        "W_out": np.einsum("bth,bt->h", head_in, dout),
        "b_out": np.array([dout.sum()]),
    }
    dh_head = dout[..., None] * params["W_out"]
    if mask is not None:
        dh_head = dh_head * mask
    dz_all = np.empty((B, T, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        g = gates[:, t]
        i, f, o, gg = g[:, :H], g[:, H:2 * H], g[:, 2 * H:3 * H], g[:, 3 * H:]
        c = cs[:, t]
        c_prev = cs[:, t - 1] if t > 0 else np.zeros((B, H))
        tc = np.tanh(c)
        dh = dh_head[:, t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc**2)
        dz = dz_all[:, t]
        dz[:, :H] = dc * gg * i * (1.0 - i)
        dz[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dc * i * (1.0 - gg**2)
        dh_next = dz @ U.T
        dc_next = dc * f
    h_prev = np.concatenate([np.zeros((B, 1, H)), hs[:, :-1]], axis=1)
    grads["W"] = X.reshape(B * T, -1).T @ dz_all.reshape(B * T, -1)
    grads["U"] = h_prev.reshape(B * T, H).T @ dz_all.reshape(B * T, -1)
    grads["b"] = dz_all.sum(axis=(0, 1))
    return grads
