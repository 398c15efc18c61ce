"""Effective receptive field maps from input-gradient saliency."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor


class CenterError(ValueError):
    """Requested center token lies outside the output grid."""


@dataclass
class ErfMap:
    """Max-normalized input saliency of one output token.

    ``grid`` is the mean over images of the absolute input gradient, summed
    over input channels, scaled so the maximum is 1.  ``log_grid`` is the
    log(1 + x) display variant under the same normalization.  A model whose
    output does not depend on the input at all yields an all-zero map with
    ``degenerate=True`` (left unnormalized).
    """

    grid: np.ndarray
    log_grid: np.ndarray
    degenerate: bool
    image_count: int
    center: tuple
    source: str = ""


def _features(model, x):
    fn = getattr(model, "forward_features", None)
    return fn(x) if fn is not None else model(x)


def erf_map(model, images, center=None, source=""):
    """Saliency of the center output token with respect to the input.

    images: (n, C, H, W) array.  The scalar probed is the channel sum of one
    token of the final feature map; its absolute input gradient is averaged
    over images and summed over input channels.
    """
    images = np.asarray(images)
    if images.ndim != 4:
        raise ValueError(f"images must be (n, C, H, W), got shape {images.shape}")
    n = images.shape[0]
    acc = np.zeros(images.shape[2:], dtype=np.float64)
    for i in range(n):
        x = Tensor(images[i : i + 1].astype(np.float64), requires_grad=True)
        feats = _features(model, x)  # (1, C, h, w)
        _, _, h, w = feats.shape
        ci, cj = (h // 2, w // 2) if center is None else center
        if not (0 <= ci < h and 0 <= cj < w):
            raise CenterError(f"center {(ci, cj)} outside output grid {h}x{w}")
        feats[:, :, ci, cj].sum().backward()
        acc += np.sum(np.abs(x.grad), axis=(0, 1))
    raw = acc / n
    peak = raw.max()
    if peak == 0.0:
        return ErfMap(raw, raw.copy(), True, n, (ci, cj), source)
    grid = raw / peak
    log_raw = np.log1p(raw)
    return ErfMap(grid, log_raw / log_raw.max(), False, n, (ci, cj), source)
