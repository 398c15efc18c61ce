"""Desk-scale supervised training loop with CSV metrics and checkpointing."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..tensor import Tensor
from ..tensor.rng import Rng
from ..model.backbone import ConfigError, ModelConfig, VssdModel
from ..model.checkpoint import save_checkpoint
from .data import Dataset, flip_horizontal
from .loss import accuracy, label_smoothing_ce
from .optim import AdamW, DivergenceError, Ema, cosine_schedule

METRIC_COLUMNS = ["epoch", "step", "lr", "train_loss", "val_acc", "wall_seconds"]


@dataclass
class TrainConfig:
    epochs: int = 20
    warmup_epochs: int = 2
    batch_size: int = 128
    peak_lr: float = 1e-3
    weight_decay: float = 0.05
    betas: tuple = (0.9, 0.999)
    label_smoothing: float = 0.1
    ema_decay: float = None  # disabled unless set (paper-scale value: 0.9999)
    seed: int = 0
    drop_path_rate: float = 0.0
    augment_flip: bool = True
    checkpoint_every: int = 0  # epochs; 0 = only final
    eval_batch_size: int = 256
    dtype: str = "float32"

    def __post_init__(self):
        if self.warmup_epochs >= self.epochs:
            raise ConfigError("warmup_epochs must be < epochs")
        if self.peak_lr <= 0:
            raise ConfigError("peak_lr must be positive")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("label_smoothing must be in [0, 1)")

    def to_json(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return json.dumps(d, indent=2)

    @staticmethod
    def from_json(text):
        d = json.loads(text)
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        return TrainConfig(**d)


@dataclass
class TrainResult:
    status: str  # "ok" or "diverged"
    final_val_acc: float
    history: list
    divergence_epoch: int = None


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n - batch_size + 1, batch_size):
        yield order[start : start + batch_size]


def evaluate(model, dataset: Dataset, batch_size=256, dtype=np.float32):
    model.training = False
    correct = 0
    for start in range(0, len(dataset), batch_size):
        xb = dataset.images[start : start + batch_size].astype(dtype)
        yb = dataset.labels[start : start + batch_size]
        logits = model(Tensor(xb))
        correct += int(np.sum(np.argmax(logits.data, axis=-1) == yb))
    return correct / len(dataset)


def train_loop(model: VssdModel, cfg: TrainConfig, train: Dataset, val: Dataset,
               out_dir=None, log=print):
    """Train ``model``; returns a TrainResult and writes metrics/checkpoints.

    Divergence (NaN loss, non-finite gradients, or loss above 10x the initial
    value for 3 consecutive epochs) halts the run gracefully with
    status="diverged" rather than raising.
    """
    if train.images.shape[1] != model.cfg.in_channels:
        raise ConfigError(
            f"dataset has {train.images.shape[1]} channels, model expects {model.cfg.in_channels}"
        )
    if model.cfg.num_classes != train.num_classes:
        raise ConfigError(
            f"model has {model.cfg.num_classes} classes, dataset has {train.num_classes}"
        )
    dtype = np.dtype(cfg.dtype).type
    rng = Rng(cfg.seed)
    data_rng = rng.spawn(1)
    path_rng = rng.spawn(2)
    named = model.named_parameters()
    opt = AdamW(named, lr=cfg.peak_lr, betas=cfg.betas, weight_decay=cfg.weight_decay)
    ema = Ema(named, cfg.ema_decay) if cfg.ema_decay else None

    steps_per_epoch = max(1, len(train) // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    warmup_steps = cfg.warmup_epochs * steps_per_epoch

    writer = None
    csv_file = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        csv_file = open(os.path.join(out_dir, "metrics.csv"), "w", newline="")
        writer = csv.writer(csv_file)
        writer.writerow(METRIC_COLUMNS)
        with open(os.path.join(out_dir, "train_config.json"), "w") as f:
            f.write(cfg.to_json())

    history = []
    initial_loss = None
    bad_epochs = 0
    status = "ok"
    divergence_epoch = None
    step = 0
    t_start = time.monotonic()
    try:
        for epoch in range(cfg.epochs):
            model.training = True
            losses = []
            for idx in _batches(len(train), cfg.batch_size, data_rng):
                xb = train.images[idx].astype(dtype)
                if cfg.augment_flip:
                    xb = flip_horizontal(xb, data_rng)
                yb = train.labels[idx]
                lr = cosine_schedule(step, total_steps, warmup_steps, cfg.peak_lr)
                logits = model(Tensor(xb), train_rng=path_rng)
                loss = label_smoothing_ce(logits, yb, cfg.label_smoothing)
                lv = float(loss.data)
                if not np.isfinite(lv):
                    raise DivergenceError(f"non-finite loss at step {step}")
                losses.append(lv)
                opt.zero_grad()
                loss.backward()
                opt.step(lr=lr)
                if ema is not None:
                    ema.update(named)
                step += 1
            train_loss = float(np.mean(losses))
            if initial_loss is None:
                initial_loss = train_loss
            val_acc = evaluate(model, val, cfg.eval_batch_size, dtype)
            wall = time.monotonic() - t_start
            row = {"epoch": epoch, "step": step, "lr": lr, "train_loss": train_loss,
                   "val_acc": val_acc, "wall_seconds": wall}
            history.append(row)
            if writer:
                writer.writerow([row[c] for c in METRIC_COLUMNS])
                csv_file.flush()
            log(f"epoch {epoch}: loss {train_loss:.4f} val_acc {val_acc:.4f} "
                f"lr {lr:.2e} ({wall:.1f}s)")
            if train_loss > 10.0 * initial_loss:
                bad_epochs += 1
                if bad_epochs >= 3:
                    raise DivergenceError(
                        f"loss exceeded 10x initial for 3 consecutive epochs (epoch {epoch})"
                    )
            else:
                bad_epochs = 0
            if out_dir and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
                save_checkpoint(os.path.join(out_dir, f"ckpt_epoch{epoch}"), model)
    except DivergenceError as exc:
        status = "diverged"
        divergence_epoch = len(history)
        log(f"divergence: {exc}")
    finally:
        if csv_file:
            csv_file.close()
    model.training = False
    if out_dir and status == "ok":
        save_checkpoint(os.path.join(out_dir, "ckpt_final"), model)
    final_acc = history[-1]["val_acc"] if history else 0.0
    return TrainResult(status=status, final_val_acc=final_acc, history=history,
                       divergence_epoch=divergence_epoch)
