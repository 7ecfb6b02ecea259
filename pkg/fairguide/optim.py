"""Adaptive first-order optimizers over dicts of numpy parameters."""

from typing import Dict

import numpy as np

Params = Dict[str, np.ndarray]


class RMSProp:
    """Momentum-free adaptive step: w -= lr * g / (sqrt(v) + eps)."""

    def __init__(self, params: Params, lr: float = 1e-3, decay: float = 0.9, eps: float = 1e-8):
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.square_avg = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        for name, grad in grads.items():
            v = self.square_avg[name]
            v *= self.decay
            v += (1.0 - self.decay) * grad * grad
            params[name] -= self.lr * grad / (np.sqrt(v) + self.eps)


class Adam:
    """Adam with optional L2 weight decay added to the gradient."""

    def __init__(self, params: Params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, grad in grads.items():
            if self.weight_decay:
                grad = grad + self.weight_decay * params[name]
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            params[name] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))
