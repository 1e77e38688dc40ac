"""Checkpoint container.

Layout (all integers little-endian)::

    magic    8 bytes   b"SCNETCKP"
    version  uint32    currently 1
    hlen     uint64    length of the JSON header in bytes
    header   hlen      UTF-8 JSON, keys sorted
    payload            concatenated float64 arrays (little-endian, C order)

The header holds ``model_config``, ``train_config`` (or null), ``seed``,
``adam_step``, ``loss_curve`` and ``tensors``: a list of
``{"name", "group", "shape", "offset"}`` where ``group`` is ``param``,
``adam_m`` or ``adam_v`` and ``offset`` is in bytes from the payload start.
Nothing time- or host-dependent is written, so equal state gives equal bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ModelConfig, TrainConfig, model_config_from_dict, train_config_from_dict
from .model import SCNet
from .numerics import Tensor
from .training import AdamState

MAGIC = b"SCNETCKP"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    model: SCNet
    train_config: TrainConfig | None = None
    adam: AdamState = field(default_factory=AdamState)
    seed: int = 0
    loss_curve: list[float] = field(default_factory=list)


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    tensors = []
    blobs = []
    offset = 0

    def add(name, group, arr):
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype="<f8")
        tensors.append({"name": name, "group": group, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes

    for name, p in ckpt.model.params.items():
        add(name, "param", p.data)
    for name in sorted(ckpt.adam.m):
        add(name, "adam_m", ckpt.adam.m[name])
        add(name, "adam_v", ckpt.adam.v[name])

    header = {
        "format_version": VERSION,
        "model_config": ckpt.model.cfg.to_dict(),
        "train_config": ckpt.train_config.to_dict() if ckpt.train_config else None,
        "seed": int(ckpt.seed),
        "adam_step": int(ckpt.adam.step),
        "loss_curve": [float(v) for v in ckpt.loss_curve],
        "tensors": tensors,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<IQ", VERSION, len(hbytes)) + hbytes)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(raw) < 20:
        raise CheckpointError(f"{path}: truncated header")
    version, hlen = struct.unpack_from("<IQ", raw, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = 20 + hlen
    if len(raw) < start:
        raise CheckpointError(f"{path}: truncated header")
    header = json.loads(raw[20:start].decode())
    payload = memoryview(raw)[start:]

    groups: dict[str, dict[str, np.ndarray]] = {"param": {}, "adam_m": {}, "adam_v": {}}
    for t in header["tensors"]:
        shape = tuple(t["shape"])
        n = int(np.prod(shape)) * 8
        if t["offset"] + n > len(payload):
            raise CheckpointError(f"{path}: tensor {t['name']} runs past the end of the file")
        arr = np.frombuffer(payload, dtype="<f8", count=n // 8, offset=t["offset"]).reshape(shape)
        groups[t["group"]][t["name"]] = arr.astype(np.float64)

    cfg: ModelConfig = model_config_from_dict(header["model_config"])
    model = SCNet(cfg, {k: Tensor(v, requires_grad=True) for k, v in groups["param"].items()})
    tcfg = train_config_from_dict(header["train_config"]) if header["train_config"] else None
    adam = AdamState(header["adam_step"], groups["adam_m"], groups["adam_v"])
    return Checkpoint(model, tcfg, adam, header["seed"], header["loss_curve"])
