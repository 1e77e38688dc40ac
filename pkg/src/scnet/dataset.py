"""Stem dataset on disk: ``root/<track>/mixture.wav`` plus ``<source>.wav`` per source."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .spectral import AudioBuffer
from .training import StemSet
from .wavio import read_wav, write_wav

MIXTURE = "mixture.wav"


def load_track(folder: str | Path, sources: Sequence[str]) -> StemSet:
    folder = Path(folder)
    mix = read_wav(folder / MIXTURE).as_stereo()
    stems = []
    for name in sources:
        path = folder / f"{name}.wav"
        if not path.exists():
            raise ConfigError(f"{folder}: missing stem file {name}.wav")
        buf = read_wav(path).as_stereo()
        if buf.sample_rate != mix.sample_rate:
            raise ConfigError(f"{path}: sample rate {buf.sample_rate} differs from mixture ({mix.sample_rate})")
        if buf.length != mix.length:
            raise ConfigError(f"{path}: length {buf.length} differs from mixture ({mix.length})")
        stems.append(buf.samples)
    return StemSet(tuple(sources), np.stack(stems), mix.samples, mix.sample_rate)


def load_dataset(root: str | Path, sources: Sequence[str], sample_rate: int | None = None) -> list[StemSet]:
    """Every sub-folder holding a mixture file, in sorted order."""
    root = Path(root)
    if not root.is_dir():
        raise ConfigError(f"data directory {root} does not exist")
    tracks = []
    for folder in sorted(p for p in root.iterdir() if (p / MIXTURE).exists()):
        tr = load_track(folder, sources)
        if sample_rate is not None and tr.sample_rate != sample_rate:
            raise ConfigError(f"{folder}: sample rate {tr.sample_rate} differs from model.sample_rate ({sample_rate})")
        tr.check_mixture()
        tracks.append(tr)
    if not tracks:
        raise ConfigError(f"no track folders with {MIXTURE} under {root}")
    return tracks


def write_track(folder: str | Path, track: StemSet, bits: int = 32) -> None:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    write_wav(folder / MIXTURE, AudioBuffer(track.mixture, track.sample_rate), bits)
    for name, stem in zip(track.sources, track.stems):
        write_wav(folder / f"{name}.wav", AudioBuffer(stem, track.sample_rate), bits)
