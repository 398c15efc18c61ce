"""Per-stage heat maps of the learned token weight m."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor
from ..model.blocks import NcssdMixer


def m_heatmap(model, image, stage):
    """Head- and block-averaged m for one stage, min-max normalized.

    image: (C, H, W) array; stage: 1-based index of a stage whose mixer is
    the non-causal SSD.  Returns a (h, w) grid on that stage's token grid.
    A spatially constant m yields an all-zero grid (nothing to normalize).
    """
    if not 1 <= stage <= len(model.stages):
        raise ValueError(f"stage must be in 1..{len(model.stages)}, got {stage}")
    blocks = model.stages[stage - 1]
    mixers = [b.mixer for b in blocks if isinstance(b.mixer, NcssdMixer)]
    if not mixers:
        raise ValueError(f"stage {stage} has no non-causal SSD blocks")
    x = np.asarray(image)
    if x.ndim != 3:
        raise ValueError(f"image must be (C, H, W), got shape {x.shape}")
    model.training = False
    model.forward_features(Tensor(x[None].astype(model.dtype)), capture=True)
    maps = [m.last_m.mean(axis=2)[0] for m in mixers]  # each (L,)
    flat = np.mean(maps, axis=0)
    # token grid: stem is stride 4, each later stage halves once more
    scale = 4 * 2 ** (stage - 1)
    h, w = x.shape[1] // scale, x.shape[2] // scale
    grid = flat.reshape(h, w)
    lo, hi = grid.min(), grid.max()
    if hi == lo:
        return np.zeros_like(grid)
    return (grid - lo) / (hi - lo)


def bilinear_upsample(grid, out_h, out_w):
    """Resize a 2-D grid with bilinear interpolation (align corners)."""
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    if h == 1 and w == 1:
        return np.full((out_h, out_w), grid[0, 0])
    ys = np.linspace(0.0, h - 1.0, out_h)
    xs = np.linspace(0.0, w - 1.0, out_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 2) if h > 1 else np.zeros(out_h, int)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 2) if w > 1 else np.zeros(out_w, int)
    fy = (ys - y0)[:, None] if h > 1 else np.zeros((out_h, 1))
    fx = (xs - x0)[None, :] if w > 1 else np.zeros((1, out_w))
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    a = grid[np.ix_(y0, x0)]
    b = grid[np.ix_(y0, x1)]
    c = grid[np.ix_(y1, x0)]
    d = grid[np.ix_(y1, x1)]
    return (a * (1 - fy) * (1 - fx) + b * (1 - fy) * fx
            + c * fy * (1 - fx) + d * fy * fx)
