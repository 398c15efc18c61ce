"""Label-smoothed cross entropy."""

from __future__ import annotations

import numpy as np

from ..tensor import Tensor, as_tensor, einsum2, log_softmax


def label_smoothing_ce(logits, labels, eps=0.1):
    """Cross entropy against (1-eps) one-hot + eps/K uniform, mean over batch."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"smoothing coefficient must be in [0, 1), got {eps}")
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    b, k = logits.shape
    target = np.full((b, k), eps / k, dtype=logits.dtype)
    target[np.arange(b), labels] += 1.0 - eps
    logp = log_softmax(logits, axis=-1)
    return -einsum2("bk,bk->", Tensor(target), logp) * (1.0 / b)


def accuracy(logits, labels):
    pred = np.argmax(logits.data if isinstance(logits, Tensor) else logits, axis=-1)
    return float(np.mean(pred == np.asarray(labels)))
