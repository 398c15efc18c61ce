"""Checkpoint directory: JSON manifest + config + one NCTD payload per tensor."""

from __future__ import annotations

import json
import os

from ..tensor.io import read_nctd, write_nctd
from ..tensor.rng import Rng
from .backbone import ModelConfig, VssdModel


def _safe(name):
    return name.replace("/", "_")


def save_checkpoint(path, model: VssdModel, extra=None):
    os.makedirs(path, exist_ok=True)
    named = model.named_parameters()
    manifest = {
        name: {"shape": list(p.shape), "dtype": p.dtype.name, "file": f"{_safe(name)}.nctd"}
        for name, p in named.items()
    }
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump({"tensors": manifest, "extra": extra or {}}, f, indent=2)
    with open(os.path.join(path, "config.json"), "w") as f:
        f.write(model.cfg.to_json())
    for name, p in named.items():
        write_nctd(os.path.join(path, manifest[name]["file"]), p.data)


def load_checkpoint(path, model: VssdModel = None):
    """Load into ``model`` (shapes must match) or build one from the saved config."""
    with open(os.path.join(path, "manifest.json")) as f:
        manifest = json.load(f)["tensors"]
    if model is None:
        with open(os.path.join(path, "config.json")) as f:
            cfg = ModelConfig.from_json(f.read())
        model = VssdModel(cfg, Rng(0))
    named = model.named_parameters()
    if set(named) != set(manifest):
        missing = set(manifest) ^ set(named)
        raise ValueError(f"checkpoint/model parameter mismatch: {sorted(missing)[:5]}")
    for name, meta in manifest.items():
        arr = read_nctd(os.path.join(path, meta["file"]))
        if list(arr.shape) != list(named[name].shape):
            raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {named[name].shape}")
        named[name].data = arr.astype(named[name].dtype)
    return model
