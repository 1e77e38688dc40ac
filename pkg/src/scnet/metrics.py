"""Energy-ratio SDR with 1 s chunk medians, and real-time-factor timing.

The SDR here is the plain ratio ``10 log10(sum ref^2 / sum (ref - est)^2)``.
No distortion filter is fitted, so the numbers are not comparable with
BSSEval v4 scores.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ShapeError
from .model import SCNet
from .numerics import make_rng
from .spectral import AudioBuffer

SDR_CAP = 100.0
# mean square below this counts as silence (-200 dBFS)
SILENCE = 1e-20

REPORT_HEADER = "# energy-ratio SDR, 1 s chunk medians (no BSSEval distortion filter; not comparable to museval)"


def _samples(x) -> np.ndarray:
    return np.asarray(x.samples if isinstance(x, AudioBuffer) else x, dtype=np.float64)


def is_silent(x) -> bool:
    x = _samples(x)
    return x.size == 0 or float(np.mean(x * x)) <= SILENCE


def sdr(ref, est) -> float:
    """SDR in dB, capped at +100. A silent reference gives NaN (check with ``math.isnan``)."""
    r, e = _samples(ref), _samples(est)
    if r.shape != e.shape:
        raise ShapeError(f"reference {r.shape} and estimate {e.shape} differ")
    if is_silent(r):
        return math.nan
    num = float(np.sum(r * r))
    den = float(np.sum((r - e) ** 2))
    if den <= num * 10 ** (-SDR_CAP / 10):
        return SDR_CAP
    return 10.0 * math.log10(num / den)


def chunk_sdrs(ref, est, sample_rate: int, chunk_seconds: float = 1.0) -> list[float]:
    """SDR of each non-overlapping chunk; silent chunks come back as NaN."""
    r, e = _samples(ref), _samples(est)
    if r.shape != e.shape:
        raise ShapeError(f"reference {r.shape} and estimate {e.shape} differ")
    size = int(round(chunk_seconds * sample_rate))
    count = r.shape[-1] // size if size > 0 else 0
    if count < 1:
        raise ValueError(f"signal of {r.shape[-1]} samples is shorter than one {chunk_seconds} s chunk")
    return [sdr(r[..., i * size:(i + 1) * size], e[..., i * size:(i + 1) * size]) for i in range(count)]


@dataclass
class SdrReport:
    chunks: dict[str, list[float]] = field(default_factory=dict)
    medians: dict[str, float] = field(default_factory=dict)

    @property
    def mean_of_medians(self) -> float:
        return float(np.mean(list(self.medians.values())))

    def rows(self) -> list[str]:
        out = ["source\tmedian_sdr_db\tscored_chunks\tsilent_chunks"]
        for name, med in self.medians.items():
            vals = self.chunks[name]
            scored = sum(not math.isnan(v) for v in vals)
            out.append(f"{name}\t{med:.4f}\t{scored}\t{len(vals) - scored}")
        return out

    def format(self) -> str:
        return "\n".join([REPORT_HEADER, *self.rows(), f"mean_of_medians\t{self.mean_of_medians:.4f}"])


def chunked_median_sdr(refs: Mapping[str, object], ests: Mapping[str, object], sample_rate: int,
                       chunk_seconds: float = 1.0) -> SdrReport:
    """Median chunk SDR per source. Sources whose every chunk is silent are an error."""
    report = SdrReport()
    for name, ref in refs.items():
        if name not in ests:
            raise KeyError(f"no estimate for source {name!r}")
        vals = chunk_sdrs(ref, ests[name], sample_rate, chunk_seconds)
        scored = [v for v in vals if not math.isnan(v)]
        if not scored:
            raise ValueError(f"source {name!r}: every chunk of the reference is silent")
        report.chunks[name] = vals
        report.medians[name] = float(np.median(scored))
    return report


@dataclass
class RtfReport:
    processing_seconds: float
    duration_seconds: float
    repetitions: int
    warmup: int
    timings: list[float] = field(default_factory=list)

    @property
    def rtf(self) -> float:
        return self.processing_seconds / self.duration_seconds

    def format(self) -> str:
        return "\n".join([
            "# real-time factor: median single-threaded wall clock / audio duration",
            "duration_s\tprocessing_s\trtf\trepetitions\twarmup",
            f"{self.duration_seconds:.3f}\t{self.processing_seconds:.6f}\t{self.rtf:.6f}\t{self.repetitions}\t{self.warmup}",
        ])


def measure_rtf(model: SCNet, seconds: float, repetitions: int = 3, warmup: int = 1, seed: int = 0) -> RtfReport:
    """Time stft -> forward -> istft on one whole random stereo input, pinned to one thread."""
    from .separation import separate_clip

    if repetitions < 3:
        raise ValueError(f"repetitions must be >= 3, got {repetitions}")
    if warmup < 1:
        raise ValueError(f"warmup must be >= 1, got {warmup}")
    sr = model.cfg.sample_rate
    n = max(1, int(round(seconds * sr)))
    x = 0.1 * make_rng(seed).standard_normal((2, n))
    timings = []
    with threadpool_limits(limits=1):
        for i in range(warmup + repetitions):
            t0 = time.perf_counter()
            separate_clip(x, model)
            dt = time.perf_counter() - t0
            if i >= warmup:
                timings.append(dt)
    return RtfReport(float(np.median(timings)), n / sr, repetitions, warmup, timings)
