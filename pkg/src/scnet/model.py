from __future__ import annotations

from collections import OrderedDict
from typing import Any

import numpy as np

from . import params as P
from .config import ModelConfig
from .decoder import decoder_forward, decoder_specs
from .encoder import encoder_forward, encoder_specs
from .errors import ShapeError
from .numerics import Tensor, no_grad
from .separator import separator_forward, separator_specs


def model_specs(cfg: ModelConfig) -> dict[str, Any]:
    return {
        "encoder": encoder_specs(cfg),
        "separator": separator_specs(cfg.dual_path, cfg.channels[-1]),
        "decoder": decoder_specs(cfg),
    }


def param_count(cfg: ModelConfig) -> tuple[int, "OrderedDict[str, int]"]:
    """Total parameter count and a per-submodule breakdown, from shapes alone."""
    specs = model_specs(cfg)
    breakdown: OrderedDict[str, int] = OrderedDict()
    for top in ("encoder", "separator", "decoder"):
        for sub in sorted(specs[top], key=_natural_key):
            breakdown[f"{top}.{sub}"] = P.count(specs[top][sub])
    return sum(breakdown.values()), breakdown


def _natural_key(name: str):
    digits = "".join(ch for ch in name if ch.isdigit())
    return (name.rstrip("0123456789"), int(digits) if digits else -1)


def model_forward(spec: Tensor, cfg: ModelConfig, tree) -> Tensor:
    """Packed mixture spectrogram ``[B, F, T, 4]`` -> per-source ``[B, S, F, T, 4]``."""
    if spec.ndim != 4 or spec.shape[-1] != cfg.input_features:
        raise ShapeError(f"model expects [B, F, T, {cfg.input_features}], got {spec.shape}")
    latent, skips = encoder_forward(spec, cfg, tree["encoder"])
    latent = separator_forward(latent, cfg.dual_path, tree["separator"], cfg.norm_groups)
    return decoder_forward(latent, skips, cfg, tree["decoder"])


class SCNet:
    """Parameter container plus forward pass for one :class:`ModelConfig`."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor] | None = None, seed: int = 0):
        self.cfg = cfg
        expected = P.flatten(model_specs(cfg))
        if params is None:
            params = P.initialize(expected, seed)
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        if missing or extra:
            raise ShapeError(f"parameter set mismatch; missing={missing[:3]} extra={extra[:3]}")
        for name, spec in expected.items():
            if params[name].shape != spec.shape:
                raise ShapeError(f"{name}: shape {params[name].shape} != declared {spec.shape}")
        self.params: dict[str, Tensor] = dict(sorted(params.items()))

    def __call__(self, spec: Tensor) -> Tensor:
        return model_forward(spec, self.cfg, P.unflatten(self.params))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def infer(self, spec: np.ndarray) -> np.ndarray:
        """Forward pass on a plain array without recording a graph."""
        with no_grad():
            return self(Tensor(np.asarray(spec, dtype=np.float64))).data
