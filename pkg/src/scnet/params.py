"""Parameter declarations, deterministic initialization and counting.

Every component declares its parameters as a nested dict of :class:`ParamSpec`
(shape + init rule). Counting works on the declarations alone; initialization
walks them in sorted-key order so a seed fully determines the values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterator, Mapping

import numpy as np

from .numerics import Tensor, make_rng


@dataclass(frozen=True)
class ParamSpec:
    shape: tuple[int, ...]
    init: str = "uniform"  # uniform | zeros | ones
    fan_in: int = 1

    @property
    def size(self) -> int:
        return math.prod(self.shape)


def weight(*shape: int, fan_in: int) -> ParamSpec:
    return ParamSpec(tuple(shape), "uniform", fan_in)


def zeros(*shape: int) -> ParamSpec:
    return ParamSpec(tuple(shape), "zeros")


def ones(*shape: int) -> ParamSpec:
    return ParamSpec(tuple(shape), "ones")


def flatten(tree: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat = {}
    for key in sorted(tree):
        name = f"{prefix}.{key}" if prefix else key
        val = tree[key]
        if isinstance(val, Mapping):
            flat.update(flatten(val, name))
        else:
            flat[name] = val
    return flat


def unflatten(flat: Mapping[str, Any]) -> dict[str, Any]:
    tree: dict[str, Any] = {}
    for name, val in flat.items():
        node = tree
        *path, leaf = name.split(".")
        for p in path:
            node = node.setdefault(p, {})
        node[leaf] = val
    return tree


def iter_specs(tree: Mapping[str, Any]) -> Iterator[tuple[str, ParamSpec]]:
    yield from flatten(tree).items()


def count(tree: Mapping[str, Any]) -> int:
    return sum(spec.size for _, spec in iter_specs(tree))


def initialize(tree: Mapping[str, Any], seed: int) -> dict[str, Tensor]:
    """Materialize declarations as flat ``name -> Tensor`` with ``requires_grad``.

    Weights are uniform in +-sqrt(1/fan_in); biases zero; norm scales one.
    """
    rng = make_rng(seed)
    out = {}
    for name, spec in iter_specs(tree):
        if spec.init == "uniform":
            bound = math.sqrt(1.0 / spec.fan_in)
            arr = rng.uniform(-bound, bound, size=spec.shape)
        elif spec.init == "zeros":
            arr = np.zeros(spec.shape)
        elif spec.init == "ones":
            arr = np.ones(spec.shape)
        else:
            raise ValueError(f"unknown init rule {spec.init!r} for {name}")
        out[name] = Tensor(arr, requires_grad=True)
    return out
