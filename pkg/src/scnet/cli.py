"""Command-line entry point: ``scnet <verb> [flags]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .bandplan import BandSplitSpec, cascade, format_report
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import load_config
from .dataset import load_dataset, write_track
from .errors import ConfigError, ShapeError, WavError
from .fixtures import KINDS, synth_fixture
from .metrics import chunked_median_sdr, measure_rtf
from .model import SCNet, param_count
from .separation import DEFAULT_WINDOW_SECONDS, separate_long
from .training import TrainingError, fit_toy
from .wavio import read_wav, write_wav

REFERENCE_PARAMS = 10.08e6

log = logging.getLogger("scnet")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def cmd_plan_bands(args) -> int:
    spec = BandSplitSpec(args.proportions, args.strides)
    print(format_report(cascade(args.freq_bins, spec, args.blocks), spec))
    return 0


def cmd_train(args) -> int:
    mcfg, tcfg = load_config(args.config)
    if args.seed is not None:
        tcfg = replace(tcfg, seed=args.seed)
    if args.steps is not None:
        tcfg = replace(tcfg, steps=args.steps)
    tracks = load_dataset(args.data, mcfg.sources, mcfg.sample_rate)
    model = SCNet(mcfg, seed=tcfg.seed)
    losses = []

    def report(step, value):
        losses.append(value)
        print(f"step {step} loss {value:.10g}", flush=True)

    _, state = fit_toy(model, tracks, tcfg, on_step=report)
    save_checkpoint(args.out, Checkpoint(model, tcfg, state, tcfg.seed, losses))
    print(f"wrote {args.out}")
    return 0


def cmd_separate(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    audio = read_wav(args.input)
    if audio.sample_rate != ckpt.model.cfg.sample_rate:
        raise ConfigError(f"--input sample rate {audio.sample_rate} differs from the model's "
                          f"{ckpt.model.cfg.sample_rate}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, buf in separate_long(audio, ckpt.model, args.window_seconds).items():
        write_wav(out / f"{name}.wav", buf, args.bits)
        print(out / f"{name}.wav")
    return 0


def cmd_eval_sdr(args) -> int:
    ref_dir, est_dir = Path(args.ref_dir), Path(args.est_dir)
    names = sorted(p.stem for p in ref_dir.glob("*.wav") if p.name != "mixture.wav")
    if args.sources:
        names = list(args.sources)
    if not names:
        raise ConfigError(f"--ref-dir {ref_dir} holds no source wav files")
    refs, ests, rate = {}, {}, None
    for name in names:
        est_path = est_dir / f"{name}.wav"
        if not est_path.exists():
            raise ConfigError(f"--est-dir {est_dir} has no {name}.wav")
        r, e = read_wav(ref_dir / f"{name}.wav").as_stereo(), read_wav(est_path).as_stereo()
        if r.sample_rate != e.sample_rate or (rate is not None and r.sample_rate != rate):
            raise ConfigError(f"{name}: sample rates disagree")
        rate = r.sample_rate
        n = min(r.length, e.length)
        if r.length != e.length:
            log.warning("%s: reference and estimate lengths differ; scoring the first %d samples", name, n)
        refs[name], ests[name] = r.samples[:, :n], e.samples[:, :n]
    print(chunked_median_sdr(refs, ests, rate, args.chunk_seconds).format())
    return 0


def cmd_bench_rtf(args) -> int:
    model = load_checkpoint(args.ckpt).model
    print(measure_rtf(model, args.seconds, args.reps, args.warmup).format())
    return 0


def cmd_param_count(args) -> int:
    mcfg, _ = load_config(args.config)
    total, breakdown = param_count(mcfg)
    width = max(len(k) for k in breakdown)
    for name, n in breakdown.items():
        print(f"{name:<{width}}  {n:>10,d}")
    print(f"{'total':<{width}}  {total:>10,d}")
    ratio = total / REFERENCE_PARAMS
    print(f"reference 10.08M: ratio {ratio:.4f} ({(ratio - 1) * 100:+.1f}%)")
    if abs(ratio - 1) > 0.25:
        print("note: outside +-25% of the reference; this config differs from the default ladder, "
              "so the reference figure does not apply directly")
    return 0


def cmd_make_fixtures(args) -> int:
    out = Path(args.out)
    for i in range(args.tracks):
        track = synth_fixture(args.kind, args.seconds, args.seed * 1000 + i, args.sample_rate, tuple(args.sources))
        write_track(out / f"track{i:02d}", track)
        print(out / f"track{i:02d}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scnet", description="Sparse band-split music source separation")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    s = sub.add_parser("plan-bands", help="print the band partition, cascade and compression table")
    s.add_argument("--freq-bins", type=int, default=2049)
    s.add_argument("--proportions", type=_floats, default=(0.175, 0.392, 0.433))
    s.add_argument("--strides", type=_ints, default=(1, 4, 16))
    s.add_argument("--blocks", type=int, default=3)
    s.set_defaults(func=cmd_plan_bands)

    s = sub.add_parser("train", help="train on a stem dataset and write a checkpoint")
    s.add_argument("--config", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("separate", help="separate a wav file into per-source wav files")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--window-seconds", type=float, default=DEFAULT_WINDOW_SECONDS)
    s.add_argument("--bits", type=int, choices=(16, 24, 32), default=32)
    s.set_defaults(func=cmd_separate)

    s = sub.add_parser("eval-sdr", help="chunked median SDR of estimates against references")
    s.add_argument("--ref-dir", required=True)
    s.add_argument("--est-dir", required=True)
    s.add_argument("--sources", type=lambda t: t.split(","))
    s.add_argument("--chunk-seconds", type=float, default=1.0)
    s.set_defaults(func=cmd_eval_sdr)

    s = sub.add_parser("bench-rtf", help="single-threaded real-time factor of a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--seconds", type=float, default=10.0)
    s.add_argument("--reps", type=int, default=3)
    s.add_argument("--warmup", type=int, default=1)
    s.set_defaults(func=cmd_bench_rtf)

    s = sub.add_parser("param-count", help="parameter breakdown for a config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_param_count)

    s = sub.add_parser("make-fixtures", help="write a synthetic stem dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--tracks", type=int, default=2)
    s.add_argument("--seconds", type=float, default=4.0)
    s.add_argument("--sample-rate", type=int, default=44100)
    s.add_argument("--kind", choices=KINDS, default="mixed")
    s.add_argument("--sources", type=lambda t: t.split(","), default=["drums", "bass", "other", "vocals"])
    s.set_defaults(func=cmd_make_fixtures)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ShapeError, WavError, CheckpointError, TrainingError, ValueError, OSError) as e:
        print(f"scnet {args.verb}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
