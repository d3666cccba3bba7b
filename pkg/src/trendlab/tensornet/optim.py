"""Adam and RMSprop over dicts of named parameter arrays (in-place updates)."""

from __future__ import annotations

import numpy as np


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ValueError(f"gradient shape mismatch for {name}")
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / (1.0 - b1 ** self.t)
            v_hat = v / (1.0 - b2 ** self.t)
            params[name] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


class Rmsprop:
    """RMSprop: v <- 0.99 v + 0.01 g^2; step = lr * g / sqrt(v + eps)."""

    def __init__(self, lr: float, decay: float = 0.99, eps: float = 1e-8):
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.t = 0
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        for name, g in grads.items():
            if params[name].shape != g.shape:
                raise ValueError(f"gradient shape mismatch for {name}")
            if name not in self.v:
                self.v[name] = np.zeros_like(params[name])
            v = self.v[name]
            v *= self.decay
            v += (1.0 - self.decay) * g * g
            params[name] -= self.lr * g / np.sqrt(v + self.eps)
        return params


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr)
    if name == "rmsprop":
        return Rmsprop(lr)
    raise ValueError(f"unknown optimizer {name!r}")


def adam_step(state: Adam, params: dict, grads: dict):
    return state.step(params, grads), state


def rmsprop_step(state: Rmsprop, params: dict, grads: dict):
    return state.step(params, grads), state
