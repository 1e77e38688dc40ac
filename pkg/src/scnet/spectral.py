"""Waveform <-> packed complex spectrogram.

Rectangular (no) window. The signal is zero-padded by ``fft_size - hop`` on
both ends (plus up to ``hop - 1`` extra samples on the right so the last
sample is covered), which puts every original sample under exactly
``fft_size / hop`` frames. Inversion is overlap-add divided by that count.

Feature packing along the last axis is ``[ch0.re, ch0.im, ch1.re, ch1.im]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 4096
    hop: int = 1024

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size % 2:
            raise ConfigError(f"fft_size must be even and >= 2, got {self.fft_size}")
        if not 1 <= self.hop <= self.fft_size:
            raise ConfigError(f"hop must lie in [1, fft_size], got {self.hop}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def overlap(self) -> int:
        return self.fft_size // self.hop

    def padding(self, length: int) -> tuple[int, int]:
        edge = self.fft_size - self.hop
        return edge, edge + (-length) % self.hop

    def frames(self, length: int) -> int:
        left, right = self.padding(length)
        padded = max(length + left + right, self.fft_size)
        return (padded - self.fft_size) // self.hop + 1


@dataclass
class AudioBuffer:
    samples: np.ndarray  # (channels, length)
    sample_rate: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2 or s.shape[0] not in (1, 2):
            raise ShapeError(f"audio must be (1|2, length), got {s.shape}")
        if s.shape[1] < 1:
            raise ShapeError("audio must contain at least one sample")
        if not np.isfinite(s).all():
            raise ValueError("audio contains non-finite samples")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        self.samples = s

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    def as_stereo(self) -> "AudioBuffer":
        if self.channels == 2:
            return self
        return AudioBuffer(np.repeat(self.samples, 2, axis=0), self.sample_rate)


@dataclass
class ComplexSpectrogram:
    data: np.ndarray  # (F, T, 2 * channels)
    length: int
    sample_rate: int

    @property
    def bins(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    @property
    def features(self) -> int:
        return self.data.shape[2]


def stft_array(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """``x[..., C, L]`` -> packed ``[..., F, T, 2C]``."""
    x = np.asarray(x, dtype=np.float64)
    L = x.shape[-1]
    left, right = cfg.padding(L)
    widths = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    xp = np.pad(x, widths)
    if xp.shape[-1] < cfg.fft_size:
        widths[-1] = (0, cfg.fft_size - xp.shape[-1])
        xp = np.pad(xp, widths)
    frames = sliding_window_view(xp, cfg.fft_size, axis=-1)[..., ::cfg.hop, :]
    spec = np.fft.rfft(frames, axis=-1)  # [..., C, T, F]
    packed = np.stack((spec.real, spec.imag), axis=-1)  # [..., C, T, F, 2]
    packed = np.moveaxis(packed, -4, -2)  # [..., T, F, C, 2]
    packed = packed.reshape(packed.shape[:-2] + (-1,))  # [..., T, F, 2C]
    return np.ascontiguousarray(np.swapaxes(packed, -3, -2))  # [..., F, T, 2C]


def istft_array(spec: np.ndarray, cfg: StftConfig, length: int) -> np.ndarray:
    """Packed ``[..., F, T, 2C]`` -> ``[..., C, length]``."""
    spec = np.asarray(spec, dtype=np.float64)
    F, T, feats = spec.shape[-3:]
    if F != cfg.bins:
        raise ConfigError(f"spectrogram has {F} bins but fft_size {cfg.fft_size} implies {cfg.bins}")
    if feats % 2:
        raise ShapeError(f"packed features must be even, got {feats}")
    if cfg.fft_size % cfg.hop:
        raise ConfigError(f"fft_size {cfg.fft_size} not a multiple of hop {cfg.hop}; overlap-add is not exact")
    C = feats // 2
    z = spec.reshape(spec.shape[:-1] + (C, 2))
    z = z[..., 0] + 1j * z[..., 1]  # [..., F, T, C]
    z = np.moveaxis(z, (-3, -2, -1), (-1, -2, -3))  # [..., C, T, F]
    frames = np.fft.irfft(z, n=cfg.fft_size, axis=-1)  # [..., C, T, fft]

    k = cfg.overlap
    blocks = frames.reshape(frames.shape[:-1] + (k, cfg.hop))
    acc = np.zeros(frames.shape[:-2] + (T + k - 1, cfg.hop))
    for j in range(k):
        acc[..., j:j + T, :] += blocks[..., :, j, :]
    signal = acc.reshape(acc.shape[:-2] + (-1,)) / k

    left, _ = cfg.padding(length)
    out = signal[..., left:left + length]
    if out.shape[-1] < length:
        widths = [(0, 0)] * (out.ndim - 1) + [(0, length - out.shape[-1])]
        out = np.pad(out, widths)
    return out


def stft(audio: AudioBuffer, cfg: StftConfig = StftConfig()) -> ComplexSpectrogram:
    stereo = audio.as_stereo()
    return ComplexSpectrogram(stft_array(stereo.samples, cfg), stereo.length, stereo.sample_rate)


def istft(spec: ComplexSpectrogram, cfg: StftConfig = StftConfig(), length: int | None = None) -> AudioBuffer:
    n = spec.length if length is None else length
    return AudioBuffer(istft_array(spec.data, cfg, n), spec.sample_rate)
