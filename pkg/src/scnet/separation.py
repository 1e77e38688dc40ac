"""Inference on arbitrary-length audio with overlapping windows and linear cross-fades."""

from __future__ import annotations

import numpy as np

from .model import SCNet
from .spectral import AudioBuffer, istft_array, stft_array

DEFAULT_WINDOW_SECONDS = 11.0


def separate_clip(samples: np.ndarray, model: SCNet) -> np.ndarray:
    """``[2, L]`` stereo samples -> ``[S, 2, L]`` per-source estimates, in one forward pass."""
    cfg = model.cfg.stft
    spec = stft_array(samples, cfg)[None]
    est = model.infer(spec)[0]  # [S, F, T, 4]
    return istft_array(est, cfg, samples.shape[-1])


def crossfade_weights(length: int) -> np.ndarray:
    """Triangular window, strictly positive at both ends."""
    n = np.arange(length)
    return np.minimum(n + 1, length - n).astype(np.float64)


def window_starts(length: int, window: int) -> list[int]:
    if length <= window:
        return [0]
    hop = max(1, window // 2)
    starts = list(range(0, length - window, hop))
    starts.append(length - window)
    return starts


def stitch(chunks: list[np.ndarray], starts: list[int], length: int) -> np.ndarray:
    """Weighted overlap-add of ``[..., window]`` chunks normalized by the summed weights."""
    window = chunks[0].shape[-1]
    w = crossfade_weights(window)
    out = np.zeros(chunks[0].shape[:-1] + (max(length, window),))
    norm = np.zeros(max(length, window))
    for chunk, s in zip(chunks, starts):
        out[..., s:s + window] += chunk * w
        norm[s:s + window] += w
    return (out / norm)[..., :length]


def separate_long(audio: AudioBuffer, model: SCNet, window_seconds: float = DEFAULT_WINDOW_SECONDS) -> dict[str, AudioBuffer]:
    """Split into windows (50% overlap), separate each, cross-fade back to the input length."""
    stereo = audio.as_stereo()
    x = stereo.samples
    L = x.shape[-1]
    window = max(1, int(round(window_seconds * audio.sample_rate)))
    if L < window:
        x = np.pad(x, [(0, 0), (0, window - L)])
    starts = window_starts(x.shape[-1], window)
    chunks = [separate_clip(x[:, s:s + window], model) for s in starts]
    est = stitch(chunks, starts, x.shape[-1])[..., :L]
    return {name: AudioBuffer(est[i], audio.sample_rate) for i, name in enumerate(model.cfg.sources)}
