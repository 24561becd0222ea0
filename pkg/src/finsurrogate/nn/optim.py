import numpy as np


class Adam:
    """Adam with the usual defaults (beta1=0.9, beta2=0.999, eps=1e-8).

    ``weight_decay`` shrinks weight matrices (keys starting with ``W`` or
    ``U``) by ``lr * weight_decay`` per step, decoupled from the moments.
    Biases are never decayed.
    """

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.lr = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        if self.lr == 0:
            return
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.weight_decay and k[0] in "WU":
                params[k] *= 1.0 - self.lr * self.weight_decay
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
