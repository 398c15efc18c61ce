from .backbone import (
    ConfigError,
    ModelConfig,
    StageSpec,
    VssdModel,
    build_model,
    micro_config,
    reduced_config,
    tiny_config,
)
from .blocks import Downsample, NcssdMixer, Stem, VssdBlock
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
from .counting import ParamFlopReport, count_params_flops
from .checkpoint import load_checkpoint, save_checkpoint
