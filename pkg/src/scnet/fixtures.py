"""Deterministic synthetic stem sets for desk-scale training and tests.

Each source is confined to a frequency band by an FFT brick-wall filter:

=========  ==================
source     band (Hz)
=========  ==================
drums      60 .. Nyquist
bass       40 .. 250
other      250 .. 2000
vocals     300 .. 3000
=========  ==================

Unknown source names get 100..1000 Hz. The ``kind`` picks the waveform
generator; ``mixed`` assigns clicks to drums, sine chords to bass/vocals and
band-limited noise to everything else.
"""

from __future__ import annotations

import numpy as np

from .numerics import derive_seed, make_rng
from .training import StemSet

KINDS = ("band-limited-noise", "sine-chords", "click-pattern", "mixed")

SOURCE_BANDS = {
    "drums": (60.0, None),
    "bass": (40.0, 250.0),
    "other": (250.0, 2000.0),
    "vocals": (300.0, 3000.0),
}
DEFAULT_BAND = (100.0, 1000.0)


def brickwall(x: np.ndarray, sample_rate: int, lo: float, hi: float | None) -> np.ndarray:
    spec = np.fft.rfft(x, axis=-1)
    freqs = np.fft.rfftfreq(x.shape[-1], 1.0 / sample_rate)
    keep = freqs >= lo
    if hi is not None:
        keep &= freqs <= hi
    return np.fft.irfft(spec * keep, n=x.shape[-1], axis=-1)


def _noise(rng, n, channels):
    return rng.standard_normal((channels, n))


def _sines(rng, n, channels, sample_rate, lo, hi):
    hi = min(hi if hi is not None else sample_rate / 2, sample_rate / 2 * 0.95)
    t = np.arange(n) / sample_rate
    out = np.zeros((channels, n))
    for _ in range(3):
        f = rng.uniform(lo, hi)
        phase = rng.uniform(0, 2 * np.pi, size=(channels, 1))
        rate = rng.uniform(0.3, 1.5)
        env = 0.6 + 0.4 * np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi))
        out += env * np.sin(2 * np.pi * f * t + phase)
    return out


def _clicks(rng, n, channels, sample_rate):
    out = np.zeros((channels, n))
    period = int(sample_rate * rng.uniform(0.2, 0.35))
    decay = np.exp(-np.arange(int(0.03 * sample_rate) + 1) / (0.006 * sample_rate))
    for start in range(int(rng.integers(0, period)), n, period):
        burst = rng.standard_normal((channels, len(decay))) * decay
        end = min(n, start + len(decay))
        out[:, start:end] += burst[:, :end - start]
    return out


def _generator(kind: str, source: str) -> str:
    if kind != "mixed":
        return kind
    return {"drums": "click-pattern", "bass": "sine-chords", "vocals": "sine-chords"}.get(source, "band-limited-noise")


def synth_fixture(kind: str = "mixed", seconds: float = 2.0, seed: int = 0, sample_rate: int = 44100,
                  sources=("drums", "bass", "other", "vocals"), channels: int = 2,
                  level: float = 0.1) -> StemSet:
    if kind not in KINDS:
        raise ValueError(f"unknown fixture kind {kind!r}; expected one of {', '.join(KINDS)}")
    n = max(1, int(round(seconds * sample_rate)))
    stems = []
    for i, name in enumerate(sources):
        rng = make_rng(derive_seed(seed, i))
        lo, hi = SOURCE_BANDS.get(name, DEFAULT_BAND)
        gen = _generator(kind, name)
        if gen == "band-limited-noise":
            x = _noise(rng, n, channels)
        elif gen == "sine-chords":
            x = _sines(rng, n, channels, sample_rate, lo, hi)
        else:
            x = _clicks(rng, n, channels, sample_rate)
        x = brickwall(x, sample_rate, lo, hi)
        rms = np.sqrt(np.mean(x ** 2))
        stems.append(x * (level / rms) if rms > 0 else x)
    stems = np.stack(stems)
    return StemSet(tuple(sources), stems, stems.sum(axis=0), sample_rate)
