"""Decoupled-weight-decay adaptive optimizer, cosine schedule, EMA."""

from __future__ import annotations

import math

import numpy as np


class DivergenceError(RuntimeError):
    """Non-finite gradients reached the optimizer."""


def no_decay_param(name, tensor):
    """Norm affines, biases, and scalar rate/decay parameters skip weight decay."""
    if tensor.ndim <= 1:
        return True
    return any(tag in name for tag in ("gamma", "beta", "bias", "a_log"))


class AdamW:
    """Bias-corrected moments with weight decay applied directly to parameters."""

    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.05):
        self.named_params = dict(named_params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.named_params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.named_params.items()}
        self.decay_mask = {k: not no_decay_param(k, p) for k, p in self.named_params.items()}

    def step(self, lr=None):
        lr = self.lr if lr is None else lr
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, p in self.named_params.items():
            g = p.grad
            if g is None:
                continue
            if not np.isfinite(g).all():
                raise DivergenceError(f"non-finite gradient for {name}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.weight_decay and self.decay_mask[name]:
                p.data -= lr * self.weight_decay * p.data
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for p in self.named_params.values():
            p.grad = None


def cosine_schedule(step, total_steps, warmup_steps, peak_lr):
    """Linear warmup from 0 to peak, then half-cosine decay to 0."""
    if step < 0:
        raise ValueError("step must be non-negative")
    if warmup_steps > 0 and step < warmup_steps:
        return peak_lr * step / warmup_steps
    if total_steps <= warmup_steps:
        return peak_lr
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    progress = min(progress, 1.0)
    return 0.5 * peak_lr * (1.0 + math.cos(math.pi * progress))


class Ema:
    """Exponential moving average shadow of the parameters."""

    def __init__(self, named_params, decay=0.9999):
        self.decay = decay
        self.shadow = {k: p.data.copy() for k, p in dict(named_params).items()}

    def update(self, named_params):
        d = self.decay
        for name, p in dict(named_params).items():
            self.shadow[name] = d * self.shadow[name] + (1.0 - d) * p.data

    def copy_to(self, named_params):
        for name, p in dict(named_params).items():
            p.data = self.shadow[name].copy()
