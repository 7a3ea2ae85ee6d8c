"""AdamW with decoupled weight decay, plus the per-epoch exponential LR schedule."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class NonFiniteGradientError(ValueError):
    """Raised when an update sees a NaN/Inf gradient; carries the parameter name."""

    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter '{name}'")
        self.name = name


def exp_lr(lr0: float, epoch: int, gamma: float = 0.99) -> float:
    """Learning rate after `epoch` whole epochs: lr0 * gamma**epoch."""
    if lr0 <= 0:
        raise ValueError(f"lr0 must be positive, got {lr0}")
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    return lr0 * gamma ** epoch


class OptimizerState:
    """Per-parameter first/second moment buffers and the shared step counter."""

    def __init__(self, params):
        self.m = {name: np.zeros_like(p.data, dtype=np.float64) for name, p in params}
        self.v = {name: np.zeros_like(p.data, dtype=np.float64) for name, p in params}
        self.step_count = 0


class AdamW:
    """Adam with weight decay applied directly to the parameters.

    The decay multiplies each parameter by (1 - lr * weight_decay) before the
    moment-based update, so a zero-gradient step is a pure decay step.
    """

    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.01):
        if lr <= 0:
            raise ValueError(f"invalid learning rate {lr}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError(f"invalid betas ({beta1}, {beta2})")
        if weight_decay < 0:
            raise ValueError(f"invalid weight decay {weight_decay}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = OptimizerState(self.params)

    def zero_grad(self):
        for _, p in self.params:
            p.zero_grad()

    def step(self):
        st = self.state
        st.step_count += 1
        t = st.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
            g64 = g.astype(np.float64, copy=False)
            m = st.m[name]
            v = st.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g64
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g64)
            if self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            update = (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.eps)
            p.data -= update.astype(p.data.dtype)


def adamw_step(params, grads, state: OptimizerState, lr: float, beta1: float = 0.9,
               beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.01):
    """Single functional AdamW update over named parameters.

    `params` and `grads` are dicts keyed by parameter name; updated values are
    returned as a new dict and the moment buffers in `state` are advanced.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    out = {}
    for name, w in params.items():
        w = np.asarray(w, dtype=np.float64)
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {w.shape} for '{name}'")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(name)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        new_w = w * (1.0 - lr * weight_decay)
        new_w = new_w - (lr / bc1) * m / (np.sqrt(v / bc2) + eps)
        out[name] = new_w
    return out


def make_state(params: dict) -> OptimizerState:
    """OptimizerState for the functional `adamw_step` interface."""
    return OptimizerState([(name, Tensor(np.asarray(w))) for name, w in params.items()])
