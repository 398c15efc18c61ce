"""Parameterized layers built on the autodiff tensor core."""

from __future__ import annotations

import numpy as np

from ..tensor import (
    Tensor,
    add_rowvec,
    conv2d,
    dwconv2d,
    einsum2,
    layer_norm,
    matmul,
    softmax,
)


class Module:
    """Base class: recursive named-parameter collection over attributes."""

    def named_parameters(self, prefix=""):
        out = {}

        def visit(key, value):
            if isinstance(value, Tensor):
                out[key] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(prefix=f"{key}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    visit(f"{key}.{i}", item)

        for name, value in vars(self).items():
            visit(f"{prefix}{name}", value)
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def num_params(self):
        return sum(p.size for p in self.parameters())

    def set_requires_grad(self, flag=True):
        for p in self.parameters():
            p.requires_grad = flag


def _normal(rng, shape, std, dtype):
    return Tensor(rng.normal(shape, 0.0, std).astype(dtype), requires_grad=True)


class Linear(Module):
    def __init__(self, rng, d_in, d_out, bias=True, std=None, dtype=np.float64):
        if std is None:
            std = float(d_in) ** -0.5
        self.weight = _normal(rng, (d_in, d_out), std, dtype)
        self.bias = Tensor(np.zeros(d_out, dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x):
        lead = x.shape[:-1]
        y = matmul(x.reshape(-1, x.shape[-1]), self.weight)
        if self.bias is not None:
            y = add_rowvec(y, self.bias)
        return y.reshape(*lead, self.weight.shape[1])


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-6, dtype=np.float64):
        self.gamma = Tensor(np.ones(dim, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(dim, dtype=dtype), requires_grad=True)
        self.eps = eps

    def __call__(self, x):
        return layer_norm(x, self.gamma, self.beta, self.eps)

    def channels_first(self, x):
        """Apply over the channel axis of a (B, C, H, W) tensor."""
        y = x.transpose(0, 2, 3, 1)
        y = layer_norm(y, self.gamma, self.beta, self.eps)
        return y.transpose(0, 3, 1, 2)


class Conv2d(Module):
    def __init__(self, rng, c_in, c_out, k=3, stride=1, pad=1, bias=True, dtype=np.float64):
        std = float(np.sqrt(2.0 / (c_in * k * k)))
        self.weight = _normal(rng, (c_out, c_in, k, k), std, dtype)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True) if bias else None
        self.stride = stride
        self.pad = pad

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, stride=self.stride, pad=self.pad)


class DWConv2d(Module):
    def __init__(self, rng, channels, k=3, dtype=np.float64):
        std = float(np.sqrt(1.0 / (k * k)))
        self.weight = _normal(rng, (channels, k, k), std, dtype)

    def __call__(self, x):
        return dwconv2d(x, self.weight)


class LocalPerception(Module):
    """Residual depthwise 3x3 mixing: y = x + dwconv(x)."""

    def __init__(self, rng, channels, dtype=np.float64):
        self.conv = DWConv2d(rng, channels, k=3, dtype=dtype)

    def __call__(self, x):
        return x + self.conv(x)


class FeedForward(Module):
    def __init__(self, rng, dim, ratio=4, dtype=np.float64):
        self.fc1 = Linear(rng, dim, dim * ratio, dtype=dtype)
        self.fc2 = Linear(rng, dim * ratio, dim, dtype=dtype)

    def __call__(self, x):
        return self.fc2(self.fc1(x).gelu())


class MultiHeadAttention(Module):
    """Standard softmax self-attention over a token sequence (B, L, C)."""

    def __init__(self, rng, dim, heads, dtype=np.float64):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = self.head_dim ** -0.5
        self.qkv = Linear(rng, dim, 3 * dim, dtype=dtype)
        self.proj = Linear(rng, dim, dim, dtype=dtype)
        self.last_attn = None

    def __call__(self, x, capture=False):
        b, l, c = x.shape
        qkv = self.qkv(x).reshape(b, l, 3, self.heads, self.head_dim)
        qkv = qkv.transpose(2, 0, 3, 1, 4)  # (3, B, h, L, dh)
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = softmax(matmul(q, k.transpose(0, 1, 3, 2)) * self.scale, axis=-1)
        if capture:
            self.last_attn = attn.data.copy()
        out = matmul(attn, v)  # (B, h, L, dh)
        out = out.transpose(0, 2, 1, 3).reshape(b, l, c)
        return self.proj(out)


def tokens_to_spatial(x, h, w):
    """(B, L, C) -> (B, C, H, W)."""
    b, l, c = x.shape
    return x.transpose(0, 2, 1).reshape(b, c, h, w)


def spatial_to_tokens(x):
    """(B, C, H, W) -> (B, L, C)."""
    b, c, h, w = x.shape
    return x.reshape(b, c, h * w).transpose(0, 2, 1)
