"""Sparse down-sampling encoder.

Tensors are laid out ``[B, F, T, C]``. Convolutions in this module run along
the frequency axis (axis 1); batch and time are broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from . import params as P
from .bandplan import BAND_NAMES, BandPlan, cascade
from .config import ModelConfig
from .errors import ConfigError, DimensionError, ShapeError
from .numerics import Tensor, concat, conv1d_strided, gelu, group_norm, narrow

FREQ_AXIS = 1


@dataclass(frozen=True)
class ConvModuleConfig:
    channels: int
    kernels: tuple[int, int, int] = (3, 3, 1)
    groups: int = 4

    def __post_init__(self):
        if self.channels % 4 or self.channels % self.groups:
            raise ConfigError(f"conv module channels {self.channels} must be divisible by 4 and by {self.groups}")

    @property
    def hidden(self) -> int:
        return self.channels // 4


@dataclass(frozen=True)
class SDBlockConfig:
    plan: BandPlan
    in_channels: int
    out_channels: int
    conv_modules: tuple[int, int, int] = (3, 2, 1)
    kernels: tuple[int, int, int] = (3, 3, 1)
    groups: int = 4

    @property
    def conv_cfg(self) -> ConvModuleConfig:
        return ConvModuleConfig(self.in_channels, self.kernels, self.groups)


def encoder_blocks(cfg: ModelConfig) -> list[SDBlockConfig]:
    report = cascade(cfg.stft.bins, cfg.band_spec, len(cfg.channels))
    ins = (cfg.input_features,) + cfg.channels[:-1]
    return [
        SDBlockConfig(plan, cin, cout, cfg.conv_modules, cfg.conv_kernels, cfg.norm_groups)
        for plan, cin, cout in zip(report.plans, ins, cfg.channels)
    ]


# -- convolution module ------------------------------------------------------

def conv_module_specs(cfg: ConvModuleConfig) -> dict[str, P.ParamSpec]:
    C, H = cfg.channels, cfg.hidden
    k1, k2, k3 = cfg.kernels
    return {
        "norm_gamma": P.ones(C), "norm_beta": P.zeros(C),
        "conv1_w": P.weight(k1, C, H, fan_in=k1 * C), "conv1_b": P.zeros(H),
        "conv2_w": P.weight(k2, H, H, fan_in=k2 * H), "conv2_b": P.zeros(H),
        "conv3_w": P.weight(k3, H, C, fan_in=k3 * H), "conv3_b": P.zeros(C),
    }


def _same_conv(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    k = w.shape[0]
    return conv1d_strided(x, w, 1, k // 2, left_pad=k // 2, bias=b, axis=FREQ_AXIS)


def conv_module_forward(x: Tensor, cfg: ConvModuleConfig, params: Mapping[str, Tensor]) -> Tensor:
    """Pre-norm residual block: norm, conv C->C/4, GELU, conv, GELU, conv C/4->C, add input."""
    if x.ndim != 4 or x.shape[-1] != cfg.channels:
        raise ShapeError(f"conv module expects [B, F, T, {cfg.channels}], got {x.shape}")
    h = group_norm(x, cfg.groups, params["norm_gamma"], params["norm_beta"])
    h = gelu(_same_conv(h, params["conv1_w"], params["conv1_b"]))
    h = gelu(_same_conv(h, params["conv2_w"], params["conv2_b"]))
    h = _same_conv(h, params["conv3_w"], params["conv3_b"])
    return x + h


def band_conv_specs(cfg: ConvModuleConfig, counts) -> dict[str, Any]:
    return {
        f"conv_{name}": {str(i): conv_module_specs(cfg) for i in range(n)}
        for name, n in zip(BAND_NAMES, counts) if n > 0
    }


def band_conv_forward(x: Tensor, plan: BandPlan, cfg: ConvModuleConfig, counts, params) -> Tensor:
    """Run each band's own stack of conv modules on its frequency slice."""
    if all(n == 0 for n in counts):
        return x
    parts = []
    for band, n in zip(plan.bands, counts):
        h = narrow(x, FREQ_AXIS, band.start, band.width)
        for i in range(n):
            h = conv_module_forward(h, cfg, params[f"conv_{band.name}"][str(i)])
        parts.append(h)
    return concat(parts, axis=FREQ_AXIS)


# -- sparse down-sampling layer -------------------------------------------------

def sd_layer_specs(plan: BandPlan, c_in: int, c_out: int) -> dict[str, Any]:
    return {
        b.name: {"w": P.weight(b.stride, c_in, c_out, fan_in=b.stride * c_in), "b": P.zeros(c_out)}
        for b in plan.bands
    }


def sd_layer_forward(x: Tensor, plan: BandPlan, params, c_out: int) -> Tensor:
    """Per-band non-overlapping strided convolution (kernel = stride), concatenated, then GELU."""
    if x.shape[FREQ_AXIS] != plan.input_width:
        raise DimensionError(f"SD layer planned for {plan.input_width} bins, got {x.shape[FREQ_AXIS]}")
    parts = []
    for b in plan.bands:
        p = params[b.name]
        if p["w"].shape[-1] != c_out:
            raise ShapeError(f"SD layer {b.name} kernel produces {p['w'].shape[-1]} channels, expected {c_out}")
        band = narrow(x, FREQ_AXIS, b.start, b.width)
        parts.append(conv1d_strided(band, p["w"], b.stride, b.right_pad, bias=p["b"], axis=FREQ_AXIS))
    return gelu(concat(parts, axis=FREQ_AXIS))


# -- SD block and encoder --------------------------------------------------------

def sd_block_specs(cfg: SDBlockConfig) -> dict[str, Any]:
    specs = band_conv_specs(cfg.conv_cfg, cfg.conv_modules)
    specs["sd"] = sd_layer_specs(cfg.plan, cfg.in_channels, cfg.out_channels)
    return specs


def sd_block_forward(x: Tensor, cfg: SDBlockConfig, params) -> tuple[Tensor, Tensor]:
    """Band-local conv modules at full resolution, then the SD layer.

    Returns ``(downsampled, skip)`` where ``skip`` is the pre-down-sampling tensor.
    """
    if x.shape[-1] != cfg.in_channels:
        raise ShapeError(f"SD block expects {cfg.in_channels} channels, got {x.shape[-1]}")
    skip = band_conv_forward(x, cfg.plan, cfg.conv_cfg, cfg.conv_modules, params)
    return sd_layer_forward(skip, cfg.plan, params["sd"], cfg.out_channels), skip


def encoder_specs(cfg: ModelConfig) -> dict[str, Any]:
    return {f"block{i}": sd_block_specs(b) for i, b in enumerate(encoder_blocks(cfg))}


def encoder_forward(y: Tensor, cfg: ModelConfig, params) -> tuple[Tensor, list[Tensor]]:
    blocks = encoder_blocks(cfg)
    if y.shape[FREQ_AXIS] != blocks[0].plan.input_width:
        raise DimensionError(f"encoder expects {blocks[0].plan.input_width} bins, got {y.shape[FREQ_AXIS]}")
    skips = []
    x = y
    for i, block in enumerate(blocks):
        x, skip = sd_block_forward(x, block, params[f"block{i}"])
        skips.append(skip)
    return x, skips
