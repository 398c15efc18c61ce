"""Analytic parameter and FLOP accounting for a model configuration.

FLOPs follow the multiply-accumulate convention the reported model budgets
use (one MAC counted once) for conv, linear, matmul, attention, and the
non-causal SSD contractions; elementwise work and normalizations are not
counted.  The parameter count mirrors the builder exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backbone import ModelConfig


@dataclass
class ParamFlopReport:
    params: int
    flops: int  # at the requested input resolution, MAC convention


def _linear(d_in, d_out, bias=True):
    return d_in * d_out + (d_out if bias else 0), d_in * d_out


def _conv(c_in, c_out, k, bias=True):
    return c_out * c_in * k * k + (c_out if bias else 0), c_in * c_out * k * k


def count_params_flops(cfg: ModelConfig, image_size=224) -> ParamFlopReport:
    params = 0
    flops = 0
    h = image_size

    def norm_params(c):
        return 2 * c

    # stem: two stride-2 convs with stride-1 refiners
    c0 = cfg.stages[0].channels
    mid = c0 // 2
    for c_in, c_out, res in (
        (cfg.in_channels, mid, h // 2),
        (mid, mid, h // 2),
        (mid, c0, h // 4),
        (c0, c0, h // 4),
    ):
        p, mac = _conv(c_in, c_out, 3)
        params += p + norm_params(c_out)
        flops += mac * res * res
    grid = h // 4

    total_blocks = sum(s.blocks for s in cfg.stages)
    for i, spec in enumerate(cfg.stages):
        d = spec.channels
        if i > 0:
            grid //= 2
            p, mac = _conv(cfg.stages[i - 1].channels, d, 3)
            params += p + norm_params(d)
            flops += mac * grid * grid
        L = grid * grid
        for _ in range(spec.blocks):
            block_p = 0
            block_mac_per_token = 0
            if cfg.use_lpu:
                block_p += 2 * d * 9
                block_mac_per_token += 2 * d * 9
            block_p += 2 * norm_params(d)
            if spec.mixer == "ncssd":
                e = cfg.expand
                di = e * d
                n = spec.state_dim
                proj_out = 2 * di if cfg.gate else di
                for p_, mac in (
                    _linear(d, proj_out),
                    (di * 9, di * 9),           # depthwise conv
                    _linear(di, n),             # B projection
                    _linear(di, n),             # C projection
                    _linear(di, spec.heads),    # delta projection
                    _linear(di, d),             # output projection
                ):
                    block_p += p_
                    block_mac_per_token += mac
                block_p += spec.heads  # decay log magnitudes
                block_mac_per_token += 2 * n * di  # the two fused contractions
            else:
                p_, mac = _linear(d, 3 * d)
                block_p += p_
                block_mac_per_token += mac
                p_, mac = _linear(d, d)
                block_p += p_
                block_mac_per_token += mac
                block_mac_per_token += 2 * L * d  # QK^T and AV
            # feed-forward
            p_, mac = _linear(d, cfg.ffn_ratio * d)
            block_p += p_
            block_mac_per_token += mac
            p_, mac = _linear(cfg.ffn_ratio * d, d)
            block_p += p_
            block_mac_per_token += mac
            params += block_p
            flops += block_mac_per_token * L

    last_c = cfg.stages[-1].channels
    params += norm_params(last_c)
    if cfg.num_classes:
        p, mac = _linear(last_c, cfg.num_classes)
        params += p
        flops += mac
    return ParamFlopReport(params=params, flops=flops)
