"""Sparse up-sampling decoder with skip fusion.

Stages run deep to shallow. Each stage up-samples with per-band transposed
convolutions back to the width its encoder block received, fuses with that
block's skip tensor, then applies the same band-local conv modules as the
encoder. The shallowest stage emits ``4 * len(sources)`` features and has no
fusion (no full-resolution skip carries that many features).
"""

from __future__ import annotations

from typing import Any

from . import params as P
from .bandplan import BandPlan
from .config import ModelConfig
from .encoder import FREQ_AXIS, ConvModuleConfig, band_conv_forward, band_conv_specs, encoder_blocks
from .errors import DimensionError, ShapeError
from .numerics import Tensor, concat, conv1d_transposed, conv2d_same, glu, moveaxis, narrow, reshape


def fusion_specs(channels: int) -> dict[str, P.ParamSpec]:
    C2 = 2 * channels
    return {"w": P.weight(3, 3, C2, C2, fan_in=9 * C2), "b": P.zeros(C2)}


def fusion_forward(skip: Tensor, up: Tensor, params) -> Tensor:
    """Sum, duplicate along features, 3x3 conv over (F, T), GLU back to C."""
    if skip.shape != up.shape:
        raise ShapeError(f"fusion inputs differ: {skip.shape} vs {up.shape}")
    s = skip + up
    d = concat([s, s], axis=-1)
    return glu(conv2d_same(d, params["w"], params["b"]), axis=-1)


def su_layer_specs(plan: BandPlan, c_in: int, c_target: int) -> dict[str, Any]:
    # kernel layout matches the forward conv it inverts: [K, C_target, C_in]
    return {
        b.name: {"w": P.weight(b.stride, c_target, c_in, fan_in=b.stride * c_in), "b": P.zeros(c_target)}
        for b in plan.bands
    }


def su_layer_forward(x: Tensor, plan: BandPlan, params, c_target: int) -> Tensor:
    if x.shape[FREQ_AXIS] != plan.output_width:
        raise DimensionError(f"SU layer expects {plan.output_width} bins, got {x.shape[FREQ_AXIS]}")
    parts = []
    for b in plan.bands:
        p = params[b.name]
        if p["w"].shape[1] != c_target:
            raise ShapeError(f"SU layer {b.name} produces {p['w'].shape[1]} channels, expected {c_target}")
        coarse = narrow(x, FREQ_AXIS, b.out_start, b.out_width)
        parts.append(conv1d_transposed(coarse, p["w"], b.stride, b.width, bias=p["b"], axis=FREQ_AXIS))
    return concat(parts, axis=FREQ_AXIS)


def _stages(cfg: ModelConfig):
    """(index, plan, c_in, c_out, fuse) from deepest to shallowest."""
    blocks = encoder_blocks(cfg)
    for i in reversed(range(len(blocks))):
        c_in = blocks[i].out_channels
        c_out = blocks[i].in_channels if i > 0 else cfg.output_features
        yield i, blocks[i].plan, c_in, c_out, i > 0


def decoder_specs(cfg: ModelConfig) -> dict[str, Any]:
    specs = {}
    for i, plan, c_in, c_out, fuse in _stages(cfg):
        stage = band_conv_specs(ConvModuleConfig(c_out, cfg.conv_kernels, cfg.norm_groups), cfg.conv_modules)
        stage["su"] = su_layer_specs(plan, c_in, c_out)
        if fuse:
            stage["fusion"] = fusion_specs(c_out)
        specs[f"stage{i}"] = stage
    return specs


def decoder_forward(latent: Tensor, skips: list[Tensor], cfg: ModelConfig, params) -> Tensor:
    """Returns ``[B, S, F, T, 4]`` (one packed spectrogram per source)."""
    x = latent
    for i, plan, c_in, c_out, fuse in _stages(cfg):
        p = params[f"stage{i}"]
        x = su_layer_forward(x, plan, p["su"], c_out)
        if fuse:
            x = fusion_forward(skips[i], x, p["fusion"])
        x = band_conv_forward(x, plan, ConvModuleConfig(c_out, cfg.conv_kernels, cfg.norm_groups),
                              cfg.conv_modules, p)
    B, F, T, _ = x.shape
    x = reshape(x, (B, F, T, len(cfg.sources), 4))
    return moveaxis(x, 3, 1)
