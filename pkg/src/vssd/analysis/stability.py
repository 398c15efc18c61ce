"""Training-stability probe for the per-token weight m."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from ..tensor import Tensor
from ..tensor.rng import Rng
from ..model.backbone import ModelConfig, VssdModel
from ..train.data import synthetic_dataset
from ..train.loss import label_smoothing_ce
from ..train.optim import AdamW

TRACE_COLUMNS = ["step", "block", "with_m", "loss", "act_mean", "act_max"]


@dataclass
class StabilityTrace:
    """Per-block activation statistics over optimization steps.

    ``rows`` holds one dict per (step, block) pair with the block-output mean
    and max absolute activation, so len(rows) == blocks * logged steps.  A
    non-finite loss or activation stops the run and records the step in
    ``divergence_step``; divergence is an outcome, not an error.
    """

    with_m: bool
    blocks: int
    steps_run: int
    rows: list
    losses: list
    divergence_step: int = None


def stability_probe(cfg: ModelConfig, steps=50, with_m=True, lr=1e-3,
                    batch_size=16, image_size=16, seed=0, log=None):
    """Train briefly on synthetic data, logging per-block activation norms.

    ``with_m=False`` ablates the token weight (m == 1) in every mixer while
    keeping everything else identical, so the two traces are comparable.
    """
    cfg = replace(cfg, use_m=with_m, drop_path_rate=0.0)
    model = VssdModel(cfg, Rng(seed), dtype=np.float32)
    data = synthetic_dataset(batch_size, image_size=image_size,
                             num_classes=cfg.num_classes, seed=seed + 1)
    xb = Tensor(data.images)
    opt = AdamW(model.named_parameters(), lr=lr, weight_decay=0.0)
    blocks = model.all_blocks()
    rows, losses = [], []
    divergence_step = None
    model.training = True
    for step in range(steps):
        logits = model(xb, capture=True)
        loss = label_smoothing_ce(logits, data.labels, 0.0)
        lv = float(loss.data)
        losses.append(lv)
        stats = [b.last_norms for b in blocks]
        for bi, (mean_abs, max_abs) in enumerate(stats):
            rows.append({"step": step, "block": bi, "with_m": with_m,
                         "loss": lv, "act_mean": mean_abs, "act_max": max_abs})
        finite = np.isfinite(lv) and all(np.isfinite(m) for _, m in stats)
        if log:
            log(f"step {step}: loss {lv:.4f} max_act {max(m for _, m in stats):.3e}")
        if not finite:
            divergence_step = step
            break
        loss.backward()
        opt.step()
        opt.zero_grad()
    model.training = False
    return StabilityTrace(with_m=with_m, blocks=len(blocks),
                          steps_run=len(losses), rows=rows, losses=losses,
                          divergence_step=divergence_step)


def write_trace_csv(trace: StabilityTrace, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=TRACE_COLUMNS)
        w.writeheader()
        for row in trace.rows:
            w.writerow(row)


def comparative_report(with_trace: StabilityTrace, without_trace: StabilityTrace):
    """Plain-text comparison of the with-m and m == 1 probe runs."""
    lines = ["stability probe: effect of the per-token weight m", ""]
    for t in (with_trace, without_trace):
        label = "with m" if t.with_m else "m == 1"
        peak = max(r["act_max"] for r in t.rows) if t.rows else float("nan")
        lines.append(f"{label}: {t.steps_run} steps, {t.blocks} blocks, "
                     f"peak |activation| {peak:.6g}, final loss {t.losses[-1]:.6g}")
        if t.divergence_step is not None:
            lines.append(f"  divergence recorded at step {t.divergence_step}")
        else:
            lines.append("  completed without divergence")
    return "\n".join(lines) + "\n"
