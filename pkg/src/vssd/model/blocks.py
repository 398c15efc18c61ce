"""VSSD block: local perception, non-causal SSD mixing, feed-forward."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor, einsum2
from .layers import (
    Conv2d,
    DWConv2d,
    FeedForward,
    LayerNorm,
    Linear,
    LocalPerception,
    Module,
    MultiHeadAttention,
    spatial_to_tokens,
    tokens_to_spatial,
)


class NcssdMixer(Module):
    """Non-causal SSD token mixer.

    Input projection yields a value path and a gate; the value path is mixed
    locally by a depthwise 3x3 conv, then projected to B/C/delta.  The fused
    kernel Y = C (B^T (X * m)) runs per head with no L x L intermediate.
    ``use_m=False`` ablates the per-token weight (m == 1).
    """

    def __init__(self, rng, dim, heads, state_dim, expand=2, gate=True, use_m=True,
                 dtype=np.float64):
        d_inner = expand * dim
        if d_inner % heads != 0:
            raise ValueError(f"inner dim {d_inner} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = d_inner // heads
        self.state_dim = state_dim
        self.d_inner = d_inner
        self.gate = gate
        self.use_m = use_m
        self.in_proj = Linear(rng, dim, 2 * d_inner if gate else d_inner, dtype=dtype)
        self.conv = DWConv2d(rng, d_inner, k=3, dtype=dtype)
        self.b_proj = Linear(rng, d_inner, state_dim, dtype=dtype)
        self.c_proj = Linear(rng, d_inner, state_dim, dtype=dtype)
        self.dt_proj = Linear(rng, d_inner, heads, dtype=dtype)
        # bias places softplus(dt) log-uniformly in [1e-3, 1e-1] at init, so the
        # per-token weight starts spread over (0, 1) rather than collapsed near 0
        dt0 = np.exp(rng.uniform((heads,)) * np.log(1e2) + np.log(1e-3))
        self.dt_proj.bias.data[:] = (dt0 + np.log(-np.expm1(-dt0))).astype(dtype)
        # decay magnitudes drawn in [1, 16), stored as logs (mamba-family convention)
        self.a_log = Tensor(np.log(1.0 + 15.0 * rng.uniform((heads,))).astype(dtype), requires_grad=True)
        self.out_proj = Linear(rng, d_inner, dim, dtype=dtype)
        self.last_m = None

    def compute_m(self, xc, capture=False):
        """Per-token per-head weight in (0, 1) from post-conv features (B, L, d_inner)."""
        rate = self.dt_proj(xc).softplus()  # (B, L, h)
        decay = -self.a_log.exp()
        m = einsum2("blh,h->blh", rate, decay).exp()
        if capture:
            self.last_m = m.data.copy()
        return m

    def __call__(self, x, hw, capture=False):
        b, l, _ = x.shape
        h, w = hw
        proj = self.in_proj(x)
        if self.gate:
            xv, z = proj[:, :, : self.d_inner], proj[:, :, self.d_inner :]
        else:
            xv, z = proj, None
        xs = tokens_to_spatial(xv, h, w)
        xc = spatial_to_tokens(self.conv(xs)).silu()  # (B, L, d_inner)
        Bp = self.b_proj(xc)
        Cp = self.c_proj(xc)
        X = xc.reshape(b, l, self.heads, self.head_dim)
        if self.use_m:
            m = self.compute_m(xc, capture=capture)
            mX = einsum2("blh,blhp->blhp", m, X)
        else:
            if capture:
                self.last_m = np.ones((b, l, self.heads), dtype=xc.dtype)
            mX = X
        T = einsum2("bln,blhp->bhnp", Bp, mX)
        Y = einsum2("bln,bhnp->blhp", Cp, T).reshape(b, l, self.d_inner)
        if z is not None:
            Y = Y * z.silu()
        return self.out_proj(Y)


class VssdBlock(Module):
    """LPU -> pre-norm token mixer -> LPU -> pre-norm FFN, all residual."""

    def __init__(self, rng, dim, heads, state_dim, mixer="ncssd", expand=2,
                 ffn_ratio=4, gate=True, use_m=True, drop_path=0.0, use_lpu=True,
                 dtype=np.float64):
        self.dim = dim
        self.mixer_kind = mixer
        self.use_lpu = use_lpu
        if use_lpu:
            self.lpu1 = LocalPerception(rng, dim, dtype=dtype)
            self.lpu2 = LocalPerception(rng, dim, dtype=dtype)
        self.norm1 = LayerNorm(dim, dtype=dtype)
        if mixer == "ncssd":
            self.mixer = NcssdMixer(rng, dim, heads, state_dim, expand=expand,
                                    gate=gate, use_m=use_m, dtype=dtype)
        elif mixer == "msa":
            self.mixer = MultiHeadAttention(rng, dim, heads, dtype=dtype)
        else:
            raise ValueError(f"unknown mixer {mixer!r}")
        self.norm2 = LayerNorm(dim, dtype=dtype)
        self.ffn = FeedForward(rng, dim, ratio=ffn_ratio, dtype=dtype)
        self.drop_path = drop_path
        self.last_norms = None

    def _mix(self, tokens, hw, capture):
        if self.mixer_kind == "ncssd":
            return self.mixer(self.norm1(tokens), hw, capture=capture)
        return self.mixer(self.norm1(tokens), capture=capture)

    def _residual(self, x, branch, rng):
        if self.drop_path <= 0.0 or rng is None:
            return x + branch
        keep = 1.0 - self.drop_path
        mask = (rng.uniform((x.shape[0],)) < keep).astype(x.dtype) / keep
        return x + einsum2("b,blc->blc", Tensor(mask), branch)

    def __call__(self, x, train_rng=None, capture=False):
        """x: (B, C, H, W) -> (B, C, H, W)."""
        b, c, h, w = x.shape
        if self.use_lpu:
            x = self.lpu1(x)
        tokens = spatial_to_tokens(x)
        tokens = self._residual(tokens, self._mix(tokens, (h, w), capture), train_rng)
        x = tokens_to_spatial(tokens, h, w)
        if self.use_lpu:
            x = self.lpu2(x)
        tokens = spatial_to_tokens(x)
        tokens = self._residual(tokens, self.ffn(self.norm2(tokens)), train_rng)
        if capture:
            self.last_norms = (
                float(np.mean(np.abs(tokens.data))),
                float(np.max(np.abs(tokens.data))),
            )
        return tokens_to_spatial(tokens, h, w)


class Downsample(Module):
    """3x3 stride-2 conv + norm: half resolution, double channels."""

    def __init__(self, rng, c_in, c_out, dtype=np.float64):
        self.conv = Conv2d(rng, c_in, c_out, k=3, stride=2, pad=1, dtype=dtype)
        self.norm = LayerNorm(c_out, dtype=dtype)

    def __call__(self, x):
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ValueError(f"downsample needs even spatial extents, got {x.shape[2:]}" )
        return self.norm.channels_first(self.conv(x))


class Stem(Module):
    """Overlapped stride-4 stem: two stride-2 3x3 convs with 3x3 refiners."""

    def __init__(self, rng, c_in, c_out, dtype=np.float64):
        mid = c_out // 2
        self.conv1 = Conv2d(rng, c_in, mid, k=3, stride=2, pad=1, dtype=dtype)
        self.norm1 = LayerNorm(mid, dtype=dtype)
        self.conv2 = Conv2d(rng, mid, mid, k=3, stride=1, pad=1, dtype=dtype)
        self.norm2 = LayerNorm(mid, dtype=dtype)
        self.conv3 = Conv2d(rng, mid, c_out, k=3, stride=2, pad=1, dtype=dtype)
        self.norm3 = LayerNorm(c_out, dtype=dtype)
        self.conv4 = Conv2d(rng, c_out, c_out, k=3, stride=1, pad=1, dtype=dtype)
        self.norm4 = LayerNorm(c_out, dtype=dtype)

    def __call__(self, x):
        if x.shape[2] % 4 or x.shape[3] % 4:
            raise ValueError(f"stem needs spatial extents divisible by 4, got {x.shape[2:]}")
        x = self.norm1.channels_first(self.conv1(x)).gelu()
        x = self.norm2.channels_first(self.conv2(x)).gelu()
        x = self.norm3.channels_first(self.conv3(x)).gelu()
        return self.norm4.channels_first(self.conv4(x))
