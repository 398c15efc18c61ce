"""Four-stage hierarchical backbone assembled from VSSD blocks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..tensor import Tensor
from ..tensor.rng import Rng
from .blocks import Downsample, Stem, VssdBlock
from .layers import LayerNorm, Linear, Module, spatial_to_tokens


class ConfigError(ValueError):
    """Invalid model configuration."""


@dataclass
class StageSpec:
    blocks: int
    channels: int
    heads: int
    mixer: str = "ncssd"
    state_dim: int = 64

    def __post_init__(self):
        if self.channels % self.heads != 0:
            raise ConfigError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.mixer not in ("ncssd", "msa"):
            raise ConfigError(f"unknown mixer {self.mixer!r}")


@dataclass
class ModelConfig:
    stages: list
    num_classes: int = 1000
    in_channels: int = 3
    expand: int = 2
    ffn_ratio: int = 4
    drop_path_rate: float = 0.0
    gate: bool = True
    use_m: bool = True
    use_lpu: bool = True

    def __post_init__(self):
        self.stages = [s if isinstance(s, StageSpec) else StageSpec(**s) for s in self.stages]
        for i, s in enumerate(self.stages):
            if s.mixer == "msa" and i != len(self.stages) - 1:
                raise ConfigError("msa mixer is only permitted in the final stage")
            if i > 0 and s.channels != 2 * self.stages[i - 1].channels:
                raise ConfigError("each stage must double the previous stage's channels")

    def to_json(self):
        return json.dumps(
            {
                "blocks": [s.blocks for s in self.stages],
                "channels": [s.channels for s in self.stages],
                "heads": [s.heads for s in self.stages],
                "mixers": [s.mixer for s in self.stages],
                "state_dims": [s.state_dim for s in self.stages],
                "num_classes": self.num_classes,
                "in_channels": self.in_channels,
                "expand": self.expand,
                "ffn_ratio": self.ffn_ratio,
                "drop_path_rate": self.drop_path_rate,
                "gate": self.gate,
                "use_m": self.use_m,
                "use_lpu": self.use_lpu,
            },
            indent=2,
        )

    @staticmethod
    def from_json(text):
        d = json.loads(text)
        stages = [
            StageSpec(blocks=b, channels=c, heads=h, mixer=m, state_dim=n)
            for b, c, h, m, n in zip(
                d["blocks"], d["channels"], d["heads"], d["mixers"], d["state_dims"]
            )
        ]
        extra = {k: d[k] for k in
                 ("num_classes", "in_channels", "expand", "ffn_ratio",
                  "drop_path_rate", "gate", "use_m", "use_lpu") if k in d}
        return ModelConfig(stages=stages, **extra)


def micro_config(num_classes=1000, **kw):
    """Blocks [2,2,8,4], channels [48,96,192,384], heads [2,4,8,16]."""
    return ModelConfig(
        stages=[
            StageSpec(2, 48, 2),
            StageSpec(2, 96, 4),
            StageSpec(8, 192, 8),
            StageSpec(4, 384, 16, mixer="msa"),
        ],
        num_classes=num_classes,
        drop_path_rate=kw.pop("drop_path_rate", 0.2),
        **kw,
    )


def tiny_config(num_classes=1000, **kw):
    """Blocks [2,4,8,4], channels [64,128,256,512], heads [2,4,8,16]."""
    return ModelConfig(
        stages=[
            StageSpec(2, 64, 2),
            StageSpec(4, 128, 4),
            StageSpec(8, 256, 8),
            StageSpec(4, 512, 16, mixer="msa"),
        ],
        num_classes=num_classes,
        drop_path_rate=kw.pop("drop_path_rate", 0.2),
        **kw,
    )


def reduced_config(num_classes=10, **kw):
    """Three-stage model sized for 32x32 inputs (8x8 -> 4x4 -> 2x2 grids)."""
    return ModelConfig(
        stages=[
            StageSpec(2, 32, 2, state_dim=16),
            StageSpec(2, 64, 4, state_dim=16),
            StageSpec(2, 128, 8, mixer="msa", state_dim=16),
        ],
        num_classes=num_classes,
        drop_path_rate=kw.pop("drop_path_rate", 0.1),
        **kw,
    )


class VssdModel(Module):
    """Overlapped stem, hierarchical stages, pooled classification head."""

    def __init__(self, cfg: ModelConfig, rng: Rng, dtype=np.float64):
        self.cfg = cfg
        self.dtype = dtype
        first = cfg.stages[0]
        self.stem = Stem(rng, cfg.in_channels, first.channels, dtype=dtype)
        self.stages = []
        self.downsamples = []
        total_blocks = sum(s.blocks for s in cfg.stages)
        block_index = 0
        for i, spec in enumerate(cfg.stages):
            if i > 0:
                self.downsamples.append(
                    Downsample(rng, cfg.stages[i - 1].channels, spec.channels, dtype=dtype)
                )
            blocks = []
            for _ in range(spec.blocks):
                # stochastic depth scales linearly with depth
                dp = cfg.drop_path_rate * block_index / max(1, total_blocks - 1)
                blocks.append(
                    VssdBlock(
                        rng,
                        spec.channels,
                        spec.heads,
                        spec.state_dim,
                        mixer=spec.mixer,
                        expand=cfg.expand,
                        ffn_ratio=cfg.ffn_ratio,
                        gate=cfg.gate,
                        use_m=cfg.use_m,
                        drop_path=dp,
                        use_lpu=cfg.use_lpu,
                        dtype=dtype,
                    )
                )
                block_index += 1
            self.stages.append(blocks)
        last_c = cfg.stages[-1].channels
        self.head_norm = LayerNorm(last_c, dtype=dtype)
        self.head = Linear(rng, last_c, cfg.num_classes, dtype=dtype) if cfg.num_classes else None
        self.training = False

    def all_blocks(self):
        return [b for stage in self.stages for b in stage]

    def forward_features(self, x, train_rng=None, capture=False):
        """(B, 3, H, W) -> final-stage feature map (B, C, h, w)."""
        x = self.stem(x)
        for i, blocks in enumerate(self.stages):
            if i > 0:
                x = self.downsamples[i - 1](x)
            for block in blocks:
                x = block(x, train_rng=train_rng if self.training else None, capture=capture)
        return x

    def __call__(self, x, train_rng=None, capture=False):
        feats = self.forward_features(x, train_rng=train_rng, capture=capture)
        if self.head is None:
            return feats
        tokens = spatial_to_tokens(feats)
        pooled = tokens.mean(axis=1)
        return self.head(self.head_norm(pooled))


def build_model(cfg: ModelConfig, rng: Rng, dtype=np.float64) -> VssdModel:
    return VssdModel(cfg, rng, dtype=dtype)
