"""Fully connected tanh network with a linear scalar head."""

import numpy as np


def init_dense(input_dim, layers, nodes, rng):
    """LeCun-uniform weights (limit sqrt(3 / fan_in)), zero biases."""
    params = {}
    fan_in = input_dim
    for l in range(layers):
        lim = np.sqrt(3.0 / fan_in)
        params[f"W{l}"] = rng.uniform(-lim, lim, size=(fan_in, nodes))
        params[f"b{l}"] = np.zeros(nodes)
        fan_in = nodes
    lim = np.sqrt(3.0 / fan_in)
    params["W_out"] = rng.uniform(-lim, lim, size=fan_in)
    params["b_out"] = np.zeros(1)
    return params


def n_hidden(params):
    return sum(1 for k in params if k.startswith("W") and k != "W_out")


def dense_forward(params, X, training=False, dropout=0.0, rng=None):
    """Return predictions ``(N,)`` and a cache for :func:`dense_backward`.

    Inverted dropout masks the hidden activations only when ``training``.
    """
    h = np.asarray(X, dtype=float)
    if h.ndim == 1:
        h = h[None, :]
    if h.shape[1] != params["W0"].shape[0]:
        raise ValueError(f"expected {params['W0'].shape[0]} inputs, got {h.shape[1]}")
    cache = [h]
    masks = []
    for l in range(n_hidden(params)):
        h = np.tanh(h @ params[f"W{l}"] + params[f"b{l}"])
        pre_drop = h
        if training and dropout > 0:
            m = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            h = h * m
        else:
            m = None
        masks.append(m)
        cache.append((pre_drop, h))
    out = h @ params["W_out"] + params["b_out"][0]
    return out, (cache, masks)


def dense_backward(params, cache, dout):
    """Gradients of ``sum(dout * out)`` w.r.t. every parameter."""
    acts, masks = cache
    grads = {}
    L = n_hidden(params)
    h_last = acts[-1][1] if L else acts[0]
    grads["W_out"] = h_last.T @ dout
    grads["b_out"] = np.array([dout.sum()])
    dh = np.outer(dout, params["W_out"])
    for l in range(L - 1, -1, -1):
        pre_drop, _ = acts[l + 1]
        if masks[l] is not None:
            dh = dh * masks[l]
        da = dh * (1.0 - pre_drop**2)
        h_in = acts[l] if l == 0 else acts[l][1]
        grads[f"W{l}"] = h_in.T @ da
        grads[f"b{l}"] = da.sum(axis=0)
        dh = da @ params[f"W{l}"].T
    return grads
