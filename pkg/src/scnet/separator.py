"""Dual-path recurrent separator with real-FFT feature conversion between layers.

Odd-numbered layers (1, 3, ...) run on time-domain features ``[B, F_r, T, C]``
and their output is moved to the frame-frequency domain
``[B, F_r, T//2 + 1, 2C]`` (real parts then imaginary parts along features).
Even-numbered layers run there and are converted back.
"""

from __future__ import annotations

from typing import Any

from . import params as P
from .config import DualPathConfig
from .errors import DimensionError, ShapeError
from .numerics import Tensor, bidirectional_recurrent, concat, group_norm, irfft_axis, linear, narrow, rfft_axis

FREQ_AXIS, TIME_AXIS = 1, 2


def recurrent_pass_specs(channels: int, hidden: int) -> dict[str, P.ParamSpec]:
    H4 = 4 * hidden
    specs = {"norm_gamma": P.ones(channels), "norm_beta": P.zeros(channels)}
    for d in ("fwd", "bwd"):
        specs[f"w_ih_{d}"] = P.weight(channels, H4, fan_in=channels)
        specs[f"w_hh_{d}"] = P.weight(hidden, H4, fan_in=hidden)
        specs[f"b_{d}"] = P.zeros(H4)
    specs["proj_w"] = P.weight(2 * hidden, channels, fan_in=2 * hidden)
    specs["proj_b"] = P.zeros(channels)
    return specs


def recurrent_pass(x: Tensor, axis: int, hidden: int, groups: int, params) -> Tensor:
    h = group_norm(x, groups, params["norm_gamma"], params["norm_beta"])
    h = bidirectional_recurrent(h, params, hidden, axis=axis)
    return x + linear(h, params["proj_w"], params["proj_b"])


def dual_path_layer_specs(channels: int, hidden: int) -> dict[str, Any]:
    return {"time": recurrent_pass_specs(channels, hidden), "freq": recurrent_pass_specs(channels, hidden)}


def dual_path_layer_forward(x: Tensor, hidden: int, params, groups: int = 4, time_first: bool = True) -> Tensor:
    if x.ndim != 4:
        raise ShapeError(f"dual-path layer expects [B, F, L, C], got {x.shape}")
    order = (("time", TIME_AXIS), ("freq", FREQ_AXIS))
    for name, axis in (order if time_first else order[::-1]):
        x = recurrent_pass(x, axis, hidden, groups, params[name])
    return x


def time_rfft_convert(y: Tensor) -> Tensor:
    if y.shape[TIME_AXIS] < 2:
        raise DimensionError("time conversion needs at least two frames")
    re, im = rfft_axis(y, TIME_AXIS)
    return concat([re, im], axis=-1)


def time_irfft_convert(x: Tensor, frames: int) -> Tensor:
    K = frames // 2 + 1
    if x.shape[TIME_AXIS] != K:
        raise DimensionError(f"{frames} frames need {K} transformed frames, got {x.shape[TIME_AXIS]}")
    C2 = x.shape[-1]
    if C2 % 2:
        raise ShapeError(f"transformed features must be even, got {C2}")
    re = narrow(x, -1, 0, C2 // 2)
    im = narrow(x, -1, C2 // 2, C2 // 2)
    return irfft_axis(re, im, frames, TIME_AXIS)


def separator_specs(cfg: DualPathConfig, channels: int) -> dict[str, Any]:
    specs = {}
    for i in range(cfg.n_layers):
        if i % 2 == 0:
            specs[f"layer{i}"] = dual_path_layer_specs(channels, cfg.hidden_odd)
        else:
            specs[f"layer{i}"] = dual_path_layer_specs(2 * channels, cfg.hidden_even)
    return specs


def separator_forward(latent: Tensor, cfg: DualPathConfig, params, groups: int = 4) -> Tensor:
    frames = latent.shape[TIME_AXIS]
    if frames < 2:
        raise DimensionError("separator needs at least two frames")
    x = latent
    for i in range(cfg.n_layers):
        p = params[f"layer{i}"]
        if i % 2 == 0:
            x = dual_path_layer_forward(x, cfg.hidden_odd, p, groups, cfg.time_first)
            x = time_rfft_convert(x)
        else:
            x = dual_path_layer_forward(x, cfg.hidden_even, p, groups, cfg.time_first)
            x = time_irfft_convert(x, frames)
    return x
