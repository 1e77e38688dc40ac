"""Loss, segmentation, augmentation, Adam and the desk-scale training loop."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .config import TrainConfig
from .errors import ShapeError
from .model import SCNet
from .numerics import Tensor, derive_seed, make_rng, sqrt, square, tsum
from .spectral import stft_array

log = logging.getLogger(__name__)

LOSS_EPS = 1e-8


class TrainingError(RuntimeError):
    pass


# -- loss -----------------------------------------------------------------

def rmse_loss(est: Tensor, ref, eps: float = LOSS_EPS) -> Tensor:
    """Mean over bins of ``sqrt((r - r')^2 + (i - i')^2 + eps)``.

    The last axis holds interleaved (re, im) pairs.
    """
    ref = ref if isinstance(ref, Tensor) else Tensor(np.asarray(ref, dtype=np.float64))
    if est.shape != ref.shape:
        raise ShapeError(f"estimate {est.shape} and reference {ref.shape} differ")
    if est.shape[-1] % 2:
        raise ShapeError("last axis must hold (re, im) pairs")
    d = square(est - ref)
    pairs = d.reshape(est.shape[:-1] + (est.shape[-1] // 2, 2))
    mag = sqrt(tsum(pairs, axis=-1) + eps)
    return mag.mean()


# -- data --------------------------------------------------------------------

@dataclass
class StemSet:
    """Aligned stems ``[S, C, L]`` plus their mixture ``[C, L]``."""

    sources: tuple[str, ...]
    stems: np.ndarray
    mixture: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.stems = np.asarray(self.stems, dtype=np.float64)
        self.mixture = np.asarray(self.mixture, dtype=np.float64)
        if self.stems.ndim != 3 or self.stems.shape[0] != len(self.sources):
            raise ShapeError(f"stems must be [S={len(self.sources)}, C, L], got {self.stems.shape}")
        if self.mixture.shape != self.stems.shape[1:]:
            raise ShapeError(f"mixture {self.mixture.shape} does not match stems {self.stems.shape}")

    @property
    def length(self) -> int:
        return self.stems.shape[-1]

    def mixture_mismatch(self) -> float:
        ref = np.linalg.norm(self.mixture)
        return float(np.linalg.norm(self.mixture - self.stems.sum(axis=0)) / max(ref, 1e-12))

    def check_mixture(self, tol: float = 1e-4) -> bool:
        err = self.mixture_mismatch()
        if err > tol:
            warnings.warn(f"mixture differs from the stem sum by {err:.2e} (relative L2)", stacklevel=2)
            return False
        return True

    def remixed(self, stems: np.ndarray) -> "StemSet":
        return StemSet(self.sources, stems, stems.sum(axis=0), self.sample_rate)

    def crop(self, start: int, length: int) -> "StemSet":
        stems = self.stems[..., start:start + length]
        if stems.shape[-1] < length:
            stems = np.pad(stems, [(0, 0), (0, 0), (0, length - stems.shape[-1])])
        return self.remixed(stems)


def segment(track_seconds: float, cfg: TrainConfig) -> list[tuple[float, float]]:
    """Overlapping windows; a track shorter than one window yields one zero-padded window."""
    seg, hop = cfg.segment_seconds, cfg.segment_hop_seconds
    if track_seconds < seg:
        return [(0.0, seg)]
    count = math.floor((track_seconds - seg) / hop + 1e-9) + 1
    return [(i * hop, i * hop + seg) for i in range(count)]


def augment_remix(batch: Sequence[StemSet], rng: np.random.Generator) -> list[StemSet]:
    """Shuffle each source independently across batch items; mixtures are rebuilt."""
    if len(batch) < 2:
        return list(batch)
    stems = np.stack([b.stems for b in batch])  # [B, S, C, L]
    out = np.empty_like(stems)
    for s in range(stems.shape[1]):
        out[:, s] = stems[rng.permutation(len(batch)), s]
    return [b.remixed(out[i]) for i, b in enumerate(batch)]


def augment_scale(batch: Sequence[StemSet], rng: np.random.Generator,
                  scale_range: tuple[float, float] = (0.25, 1.25)) -> list[StemSet]:
    lo, hi = scale_range
    if not 0 < lo <= hi:
        raise ValueError(f"scale range must satisfy 0 < lo <= hi, got {scale_range}")
    out = []
    for b in batch:
        gains = rng.uniform(lo, hi, size=(b.stems.shape[0], 1, 1))
        out.append(b.remixed(b.stems * gains))
    return out


# -- optimizer -------------------------------------------------------------------

@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> tuple[dict[str, np.ndarray], AdamState]:
    t = state.step + 1
    new_params, m_new, v_new = {}, {}, {}
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise ShapeError(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        m = beta1 * state.m.get(name, 0.0) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, 0.0) + (1.0 - beta2) * g * g
        new_params[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        m_new[name], v_new[name] = m, v
    return new_params, AdamState(t, m_new, v_new)


# -- training loop ------------------------------------------------------------------

@dataclass
class TrainLog:
    losses: list[float] = field(default_factory=list)


def batch_spectrograms(batch: Sequence[StemSet], model: SCNet) -> tuple[np.ndarray, np.ndarray]:
    """Mixture ``[B, F, T, 4]`` and stem ``[B, S, F, T, 4]`` spectrograms."""
    cfg = model.cfg.stft
    mix = np.stack([_stereo(b.mixture) for b in batch])
    stems = np.stack([np.stack([_stereo(s) for s in b.stems]) for b in batch])
    return stft_array(mix, cfg), stft_array(stems, cfg)


def _stereo(x: np.ndarray) -> np.ndarray:
    return np.repeat(x, 2, axis=0) if x.shape[0] == 1 else x


def segment_pool(tracks: Sequence[StemSet], cfg: TrainConfig) -> list[tuple[int, int, int]]:
    """(track index, start sample, length) for every training window."""
    pool = []
    for i, tr in enumerate(tracks):
        sr = tr.sample_rate
        length = int(round(cfg.segment_seconds * sr))
        for start, _ in segment(tr.length / sr, cfg):
            pool.append((i, int(round(start * sr)), length))
    return pool


def fit_toy(model: SCNet, tracks: Sequence[StemSet], cfg: TrainConfig,
            state: AdamState | None = None,
            on_step: Callable[[int, float], None] | None = None) -> tuple[TrainLog, AdamState]:
    """segment -> augment -> stft -> forward -> loss -> backward -> Adam, for ``cfg.steps`` steps."""
    if not tracks:
        raise TrainingError("no training tracks")
    for tr in tracks:
        if tuple(tr.sources) != tuple(model.cfg.sources):
            raise TrainingError(f"track sources {tr.sources} do not match model sources {model.cfg.sources}")
    pool = segment_pool(tracks, cfg)
    rng = make_rng(derive_seed(cfg.seed, 1))
    state = state or AdamState()
    trace = TrainLog()
    for step in range(cfg.steps):
        picks = rng.integers(0, len(pool), size=cfg.batch_size)
        batch = [tracks[pool[k][0]].crop(pool[k][1], pool[k][2]) for k in picks]
        if cfg.remix:
            batch = augment_remix(batch, rng)
        batch = augment_scale(batch, rng, cfg.scale_range)
        mix, ref = batch_spectrograms(batch, model)

        model.zero_grad()
        try:
            loss = rmse_loss(model(Tensor(mix)), ref)
            loss.backward()
        except FloatingPointError as e:
            raise TrainingError(f"non-finite values at step {step}: {e}") from e
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"loss became {value} at step {step}")

        names = list(model.params)
        new, state = adam_step({n: model.params[n].data for n in names},
                               {n: model.params[n].grad for n in names if model.params[n].grad is not None},
                               state, cfg.lr)
        for n in names:
            model.params[n].data = new[n]
        trace.losses.append(value)
        if on_step is not None:
            on_step(step, value)
        if cfg.log_every and step % cfg.log_every == 0:
            log.info("step %d loss %.6f", step, value)
    return trace, state


def overfit_config(seconds: float, **overrides) -> TrainConfig:
    """Training settings for memorizing one clip: no gain jitter, one full-length window."""
    base = TrainConfig(segment_seconds=seconds, segment_hop_seconds=seconds, batch_size=1,
                       scale_range=(1.0, 1.0), remix=False)
    return replace(base, **overrides)
