"""Finite-difference verification of tape gradients."""

from __future__ import annotations

import numpy as np

from .tensor import EvaluationError, Tensor


def grad_check(f, leaves, h=1e-5, threshold=1e-6):
    """Worst relative error between tape gradients and central differences.

    ``f`` must be a deterministic scalar-valued function of the float64
    ``leaves`` (evaluated with no arguments; it closes over the leaves).
    Elements whose analytic gradient magnitude is below ``threshold`` are
    skipped in the relative comparison.
    """
    for leaf in leaves:
        if leaf.dtype != np.float64:
            raise EvaluationError(f"grad_check needs float64 leaves, got {leaf.dtype}")
        leaf.requires_grad = True
        leaf.zero_grad()
    out = f()
    if not isinstance(out, Tensor) or out.size != 1:
        raise EvaluationError("grad_check needs a scalar Tensor output")
    if not np.isfinite(out.data).all():
        raise EvaluationError("non-finite function value")
    out.backward()
    worst = 0.0
    for leaf in leaves:
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        flat = leaf.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise EvaluationError("non-finite function value during finite differencing")
            numeric = (fp - fm) / (2.0 * h)
            if abs(aflat[i]) <= threshold:
                continue
            denom = max(abs(aflat[i]), abs(numeric))
            worst = max(worst, abs(aflat[i] - numeric) / denom)
    return worst
