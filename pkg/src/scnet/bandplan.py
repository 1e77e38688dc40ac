"""Frequency partition and compression bookkeeping for the sparse down-sampling stages.

A :class:`BandSplitSpec` divides a frequency axis into low/mid/high bands by
proportion and gives each band a stride. :func:`plan` turns that into concrete
integer geometry for one stage:

* ``width_low = floor(p_low * F)``, ``width_mid = floor(p_mid * F)``, the high
  band takes the remainder;
* each band is right-padded to a multiple of its stride and reduced by a
  non-overlapping convolution, so ``out_width = ceil(width / stride)``.

The same proportions are re-applied at every stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError

BAND_NAMES = ("low", "mid", "high")


@dataclass(frozen=True)
class BandSplitSpec:
    proportions: tuple[float, float, float] = (0.175, 0.392, 0.433)
    strides: tuple[int, int, int] = (1, 4, 16)

    def __post_init__(self):
        props = tuple(float(p) for p in self.proportions)
        strides = tuple(int(s) for s in self.strides)
        if len(props) != 3 or len(strides) != 3:
            raise ConfigError("band spec needs exactly three proportions and three strides")
        if any(p < 0 for p in props):
            raise ConfigError(f"proportions must be non-negative, got {props}")
        if abs(sum(props) - 1.0) > 1e-9:
            raise ConfigError(f"proportions must sum to 1, got {sum(props)!r}")
        if any(s < 1 for s in strides):
            raise ConfigError(f"strides must be >= 1, got {strides}")
        object.__setattr__(self, "proportions", props)
        object.__setattr__(self, "strides", strides)

    @classmethod
    def from_percent(cls, low: float, mid: float, high: float, strides: Sequence[int] = (1, 4, 16)):
        """Build from percentages that may be rounded in print (e.g. 23.3 / 66.7)."""
        total = low + mid + high
        return cls((low / total, mid / total, high / total), tuple(strides))


@dataclass(frozen=True)
class Band:
    name: str
    start: int
    width: int
    stride: int
    right_pad: int
    out_start: int
    out_width: int


@dataclass(frozen=True)
class BandPlan:
    input_width: int
    bands: tuple[Band, Band, Band]

    @property
    def output_width(self) -> int:
        return sum(b.out_width for b in self.bands)

    @property
    def retention(self) -> float:
        return self.output_width / self.input_width

    @property
    def compression(self) -> float:
        return 1.0 - self.retention


@dataclass(frozen=True)
class CompressionReport:
    gcr: float
    widths: tuple[int, ...]
    plans: tuple[BandPlan, ...]


def plan(F_in: int, spec: BandSplitSpec) -> BandPlan:
    if F_in < 3:
        raise ConfigError(f"cannot split {F_in} bins into three bands")
    w_low = math.floor(spec.proportions[0] * F_in)
    w_mid = math.floor(spec.proportions[1] * F_in)
    widths = (w_low, w_mid, F_in - w_low - w_mid)
    for name, w in zip(BAND_NAMES, widths):
        if w < 1:
            raise ConfigError(f"{name} band is empty for F_in={F_in} and proportions {spec.proportions}")
    bands = []
    start = out_start = 0
    for name, w, s in zip(BAND_NAMES, widths, spec.strides):
        out_w = -(-w // s)
        bands.append(Band(name, start, w, s, out_w * s - w, out_start, out_w))
        start += w
        out_start += out_w
    return BandPlan(F_in, tuple(bands))


def global_compression(spec: BandSplitSpec) -> float:
    """Rounding-free compression ratio ``1 - sum(p_i / s_i)``."""
    return 1.0 - sum(p / s for p, s in zip(spec.proportions, spec.strides))


def cascade(F0: int, spec: BandSplitSpec, n_blocks: int) -> CompressionReport:
    if n_blocks < 1:
        raise ConfigError(f"n_blocks must be >= 1, got {n_blocks}")
    widths = [F0]
    plans = []
    for _ in range(n_blocks):
        p = plan(widths[-1], spec)
        plans.append(p)
        widths.append(p.output_width)
    return CompressionReport(global_compression(spec), tuple(widths), tuple(plans))


def format_report(report: CompressionReport, spec: BandSplitSpec) -> str:
    lines = [
        f"proportions (low/mid/high): {', '.join(f'{p:.4f}' for p in spec.proportions)}",
        f"strides     (low/mid/high): {', '.join(str(s) for s in spec.strides)}",
        f"ideal GCR: {report.gcr:.4f}",
        "",
        f"{'block':>5} {'F_in':>6} {'band':>5} {'start':>6} {'width':>6} {'pad':>4} {'out':>5} {'F_out':>6} {'R':>7}",
    ]
    for i, p in enumerate(report.plans, 1):
        for j, b in enumerate(p.bands):
            head = f"{i:>5} {p.input_width:>6}" if j == 0 else f"{'':>5} {'':>6}"
            tail = f"{p.output_width:>6} {p.retention:>7.4f}" if j == 0 else ""
            lines.append(f"{head} {b.name:>5} {b.start:>6} {b.width:>6} {b.right_pad:>4} {b.out_width:>5} {tail}".rstrip())
    lines.append("")
    lines.append("cascade: " + " -> ".join(str(w) for w in report.widths))
    return "\n".join(lines)
