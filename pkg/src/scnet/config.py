"""Model and training configuration with a strict JSON schema.

A config file is a JSON object with optional ``"model"`` and ``"train"``
sections. Every key must be a known field; missing fields take defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .bandplan import BandSplitSpec, cascade
from .errors import ConfigError
from .spectral import StftConfig

DEFAULT_SOURCES = ("drums", "bass", "other", "vocals")
AUDIO_CHANNELS = 2
FEATURES_PER_SOURCE = 2 * AUDIO_CHANNELS


@dataclass(frozen=True)
class DualPathConfig:
    n_layers: int = 6
    hidden_odd: int = 128
    hidden_even: int = 256
    time_first: bool = True

    def __post_init__(self):
        if self.n_layers < 2 or self.n_layers % 2:
            raise ConfigError(f"dual_path.n_layers must be even and >= 2, got {self.n_layers}")
        if self.hidden_odd < 1:
            raise ConfigError(f"dual_path.hidden_odd must be >= 1, got {self.hidden_odd}")
        if self.hidden_even != 2 * self.hidden_odd:
            raise ConfigError(
                f"dual_path.hidden_even must equal 2 * hidden_odd ({2 * self.hidden_odd}), got {self.hidden_even}")


@dataclass(frozen=True)
class ModelConfig:
    sample_rate: int = 44100
    fft_size: int = 4096
    hop: int = 1024
    proportions: tuple[float, float, float] = (0.175, 0.392, 0.433)
    strides: tuple[int, int, int] = (1, 4, 16)
    channels: tuple[int, ...] = (32, 64, 128)
    conv_modules: tuple[int, int, int] = (3, 2, 1)
    conv_kernels: tuple[int, int, int] = (3, 3, 1)
    norm_groups: int = 4
    dual_path: DualPathConfig = field(default_factory=DualPathConfig)
    sources: tuple[str, ...] = DEFAULT_SOURCES
    decoder_fusion: str = "after-su"

    def __post_init__(self):
        for name in ("proportions", "strides", "channels", "conv_modules", "conv_kernels", "sources"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if isinstance(self.dual_path, dict):
            object.__setattr__(self, "dual_path", _build(DualPathConfig, self.dual_path, "model.dual_path"))
        self.validate()

    @property
    def stft(self) -> StftConfig:
        return StftConfig(self.fft_size, self.hop)

    @property
    def band_spec(self) -> BandSplitSpec:
        return BandSplitSpec(self.proportions, self.strides)

    @property
    def input_features(self) -> int:
        return FEATURES_PER_SOURCE

    @property
    def output_features(self) -> int:
        return FEATURES_PER_SOURCE * len(self.sources)

    @property
    def freq_cascade(self) -> tuple[int, ...]:
        return cascade(self.stft.bins, self.band_spec, len(self.channels)).widths

    def validate(self) -> None:
        if self.sample_rate <= 0:
            raise ConfigError(f"model.sample_rate must be positive, got {self.sample_rate}")
        try:
            stft = StftConfig(self.fft_size, self.hop)
            spec = BandSplitSpec(self.proportions, self.strides)
        except ConfigError as e:
            raise ConfigError(f"model: {e}") from None
        if stft.fft_size % stft.hop:
            raise ConfigError(f"model.hop must divide model.fft_size ({self.fft_size}), got {self.hop}")
        if not self.channels:
            raise ConfigError("model.channels must list at least one stage")
        if any(b <= a for a, b in zip(self.channels, self.channels[1:])):
            raise ConfigError(f"model.channels must be strictly increasing, got {self.channels}")
        for c in self.channels:
            if c % 4 or c % self.norm_groups:
                raise ConfigError(f"model.channels entry {c} must be divisible by 4 and by norm_groups")
        if len(self.conv_modules) != 3 or any(n < 0 for n in self.conv_modules):
            raise ConfigError(f"model.conv_modules must be three non-negative counts, got {self.conv_modules}")
        lo, mid, hi = self.conv_modules
        if not lo >= mid >= hi:
            raise ConfigError(f"model.conv_modules must be non-increasing low->high, got {self.conv_modules}")
        if len(self.conv_kernels) != 3 or any(k < 1 or k % 2 == 0 for k in self.conv_kernels):
            raise ConfigError(f"model.conv_kernels must be three odd sizes, got {self.conv_kernels}")
        if self.norm_groups < 1 or FEATURES_PER_SOURCE % self.norm_groups:
            raise ConfigError(f"model.norm_groups must divide {FEATURES_PER_SOURCE}, got {self.norm_groups}")
        if not self.sources or len(set(self.sources)) != len(self.sources):
            raise ConfigError(f"model.sources must be non-empty and unique, got {self.sources}")
        if self.decoder_fusion != "after-su":
            raise ConfigError(f"model.decoder_fusion: only 'after-su' is implemented, got {self.decoder_fusion!r}")
        try:
            widths = cascade(stft.bins, spec, len(self.channels)).widths
        except ConfigError as e:
            raise ConfigError(f"model.proportions: {e}") from None
        if widths[-1] < 1:
            raise ConfigError("model: frequency cascade collapses to zero bins")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        return _listify(d)


@dataclass(frozen=True)
class TrainConfig:
    segment_seconds: float = 11.0
    segment_hop_seconds: float = 1.0
    lr: float = 5e-4
    batch_size: int = 4
    steps: int = 200
    seed: int = 0
    scale_range: tuple[float, float] = (0.25, 1.25)
    remix: bool = True
    log_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "scale_range", tuple(float(v) for v in self.scale_range))
        if self.segment_seconds <= 0:
            raise ConfigError(f"train.segment_seconds must be positive, got {self.segment_seconds}")
        if not 0 < self.segment_hop_seconds <= self.segment_seconds:
            raise ConfigError("train.segment_hop_seconds must lie in (0, segment_seconds]")
        if self.lr < 0:
            raise ConfigError(f"train.lr must be >= 0, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"train.batch_size must be >= 1, got {self.batch_size}")
        if self.steps < 0:
            raise ConfigError(f"train.steps must be >= 0, got {self.steps}")
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ConfigError(f"train.scale_range must satisfy 0 < lo <= hi, got {self.scale_range}")

    def to_dict(self) -> dict[str, Any]:
        return _listify(dataclasses.asdict(self))


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from None


def model_config_from_dict(data: dict[str, Any]) -> ModelConfig:
    return _build(ModelConfig, data, "model")


def train_config_from_dict(data: dict[str, Any]) -> TrainConfig:
    return _build(TrainConfig, data, "train")


def load_config(path: str | Path) -> tuple[ModelConfig, TrainConfig]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = sorted(set(data) - {"model", "train"})
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {', '.join(unknown)}")
    return model_config_from_dict(data.get("model", {})), train_config_from_dict(data.get("train", {}))


def save_config(path: str | Path, model: ModelConfig, train: TrainConfig | None = None) -> None:
    payload: dict[str, Any] = {"model": model.to_dict()}
    if train is not None:
        payload["train"] = train.to_dict()
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def toy_model_config(**overrides) -> ModelConfig:
    """Small configuration used by tests and desk-scale demos (64 input bins)."""
    base = dict(
        sample_rate=8000, fft_size=126, hop=42, channels=(8, 16, 32), conv_modules=(1, 1, 0),
        dual_path=DualPathConfig(n_layers=2, hidden_odd=4, hidden_even=8), sources=("bass", "other"),
    )
    base.update(overrides)
    return ModelConfig(**base)
