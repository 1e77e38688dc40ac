"""WAV, config, checkpoint, dataset, fixtures, long-input separation and the CLI."""

import json
import struct

import numpy as np
import pytest

from scnet.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from scnet.cli import main
from scnet.config import ModelConfig, TrainConfig, load_config, save_config, toy_model_config
from scnet.dataset import load_dataset, write_track
from scnet.errors import ConfigError, WavError
from scnet.fixtures import KINDS, synth_fixture
from scnet.model import SCNet
from scnet.numerics import make_rng
from scnet.separation import crossfade_weights, separate_long, stitch, window_starts
from scnet.spectral import AudioBuffer
from scnet.training import AdamState
from scnet.wavio import read_wav, write_wav


# -- wav ------------------------------------------------------------------------

def test_float_round_trip_bit_exact(tmp_path):
    x = make_rng(0).uniform(-1, 1, (2, 1001)).astype(np.float32).astype(np.float64)
    write_wav(tmp_path / "a.wav", AudioBuffer(x, 44100), 32)
    back = read_wav(tmp_path / "a.wav")
    assert back.sample_rate == 44100
    np.testing.assert_array_equal(back.samples, x)


@pytest.mark.parametrize("bits,lsb", [(16, 2.0**-15), (24, 2.0**-23)])
def test_pcm_round_trip(tmp_path, bits, lsb):
    x = make_rng(1).uniform(-1, 1 - lsb, (1, 777))
    write_wav(tmp_path / "a.wav", AudioBuffer(x, 8000), bits)
    back = read_wav(tmp_path / "a.wav")
    assert back.samples.shape == x.shape
    assert np.abs(back.samples - x).max() <= lsb


def test_pcm16_matches_known_bytes(tmp_path):
    write_wav(tmp_path / "a.wav", AudioBuffer(np.array([[0.5, -1.0, 0.0]]), 8000), 16)
    raw = (tmp_path / "a.wav").read_bytes()
    assert raw[:4] == b"RIFF" and raw[8:12] == b"WAVE"
    assert struct.unpack("<3h", raw[-6:]) == (16384, -32768, 0)


def test_extensible_and_extra_chunks(tmp_path):
    data = np.array([1000, -2000, 3000, -4000], dtype="<i2").tobytes()
    fmt = struct.pack("<HHIIHH", 0xFFFE, 2, 8000, 32000, 4, 16)
    ext = struct.pack("<HHI", 22, 16, 3) + struct.pack("<H", 1) + b"\x00" * 14
    body = (b"WAVE" + b"LIST" + struct.pack("<I", 3) + b"abc\x00"
            + b"fmt " + struct.pack("<I", 40) + fmt + ext
            + b"data" + struct.pack("<I", len(data)) + data)
    (tmp_path / "e.wav").write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    buf = read_wav(tmp_path / "e.wav")
    np.testing.assert_array_equal(buf.samples, np.array([[1000, 3000], [-2000, -4000]]) / 32768)


def test_truncated_and_malformed(tmp_path):
    write_wav(tmp_path / "a.wav", AudioBuffer(np.zeros((1, 100)), 8000), 16)
    raw = (tmp_path / "a.wav").read_bytes()
    (tmp_path / "t.wav").write_bytes(raw[:-20])
    with pytest.raises(WavError, match=r"truncated data chunk at byte 36"):
        read_wav(tmp_path / "t.wav")
    (tmp_path / "nodata.wav").write_bytes(raw[:36])
    with pytest.raises(WavError, match="missing data chunk"):
        read_wav(tmp_path / "nodata.wav")
    (tmp_path / "nofmt.wav").write_bytes(raw[:12])
    with pytest.raises(WavError, match="missing fmt chunk"):
        read_wav(tmp_path / "nofmt.wav")
    (tmp_path / "junk.wav").write_bytes(b"hello world!")
    with pytest.raises(WavError, match="byte 0"):
        read_wav(tmp_path / "junk.wav")
    bad = bytearray(raw)
    bad[20:22] = struct.pack("<H", 2)  # ADPCM
    (tmp_path / "codec.wav").write_bytes(bytes(bad))
    with pytest.raises(WavError, match="unsupported codec"):
        read_wav(tmp_path / "codec.wav")


# -- config and checkpoint ---------------------------------------------------------

def test_config_round_trip(tmp_path):
    m, t = toy_model_config(), TrainConfig(lr=1e-3, scale_range=(0.5, 1.0))
    save_config(tmp_path / "c.json", m, t)
    m2, t2 = load_config(tmp_path / "c.json")
    assert (m2, t2) == (m, t)
    save_config(tmp_path / "d.json", m2, t2)
    assert (tmp_path / "c.json").read_text() == (tmp_path / "d.json").read_text()


def test_config_errors_name_fields(tmp_path):
    cases = [
        ({"model": {"chanels": [8]}}, "chanels"),
        ({"model": {"channels": [6, 12]}}, "channels"),
        ({"model": {"dual_path": {"n_layers": 2, "hidden_odd": 4, "hidden_even": 4}}}, "hidden_even"),
        ({"model": {"proportions": [0.5, 0.5, 0.5]}}, "proportions"),
        ({"train": {"segment_hop_seconds": 20}}, "segment_hop_seconds"),
        ({"extra": {}}, "extra"),
    ]
    for payload, field in cases:
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(payload))
        with pytest.raises(ConfigError, match=field):
            load_config(path)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    cfg = toy_model_config()
    model = SCNet(cfg, seed=4)
    rng = make_rng(0)
    adam = AdamState(3, {k: rng.standard_normal(p.shape) for k, p in model.params.items()},
                     {k: rng.random(p.shape) for k, p in model.params.items()})
    save_checkpoint(tmp_path / "m.ckpt", Checkpoint(model, TrainConfig(), adam, 11, [1.0, 0.5]))
    back = load_checkpoint(tmp_path / "m.ckpt")
    assert back.model.cfg == cfg and back.seed == 11 and back.loss_curve == [1.0, 0.5]
    assert back.adam.step == 3
    x = rng.standard_normal((1, 64, 5, 4))
    np.testing.assert_array_equal(model.infer(x), back.model.infer(x))
    for k in adam.m:
        np.testing.assert_array_equal(adam.v[k], back.adam.v[k])
    save_checkpoint(tmp_path / "n.ckpt", back)
    assert (tmp_path / "m.ckpt").read_bytes() == (tmp_path / "n.ckpt").read_bytes()
    (tmp_path / "bad.ckpt").write_bytes(b"nope")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad.ckpt")


# -- fixtures and dataset -----------------------------------------------------------

@pytest.mark.parametrize("kind", KINDS)
def test_fixture_identity_and_determinism(kind):
    a = synth_fixture(kind, 1.0, 5, 8000)
    b = synth_fixture(kind, 1.0, 5, 8000)
    np.testing.assert_array_equal(a.stems, b.stems)
    np.testing.assert_array_equal(a.mixture, a.stems.sum(axis=0))


def test_bass_stem_is_low():
    t = synth_fixture("band-limited-noise", 2.0, 0, 44100, ("bass",))
    spec = np.abs(np.fft.rfft(t.stems[0], axis=-1)) ** 2
    freqs = np.fft.rfftfreq(t.length, 1 / 44100)
    assert spec[:, freqs < 300].sum() / spec.sum() >= 0.95


def test_dataset_round_trip(tmp_path):
    tracks = [synth_fixture("mixed", 0.5, i, 8000, ("bass", "other")) for i in range(2)]
    for i, t in enumerate(tracks):
        write_track(tmp_path / f"t{i}", t)
    loaded = load_dataset(tmp_path, ("bass", "other"), 8000)
    assert len(loaded) == 2
    np.testing.assert_allclose(loaded[1].stems, tracks[1].stems, atol=1e-7)
    with pytest.raises(ConfigError, match="vocals"):
        load_dataset(tmp_path, ("bass", "vocals"))
    with pytest.raises(ConfigError, match="sample rate"):
        load_dataset(tmp_path, ("bass", "other"), 44100)


# -- long-input separation ---------------------------------------------------------------

def test_crossfade_partition_of_unity():
    for length, window in [(1000, 100), (1234, 97), (50, 50), (101, 100)]:
        starts = window_starts(length, window)
        ones = [np.ones((1, window))] * len(starts)
        np.testing.assert_allclose(stitch(ones, starts, length), 1.0, atol=1e-12)
        assert crossfade_weights(window).min() > 0


def test_identical_windows_stitch_without_seams():
    content = make_rng(0).standard_normal((2, 3, 64))
    starts = window_starts(300, 64)
    # every window carries the same signal segment: a periodic input with period = window hop
    sig = np.tile(content[..., :32], 10)[..., :300]
    chunks = [sig[..., s:s + 64] for s in starts]
    np.testing.assert_allclose(stitch(chunks, starts, 300), sig, atol=1e-12)


def test_separate_long_lengths():
    model = SCNet(toy_model_config(), seed=1)
    rng = make_rng(2)
    for n in list(rng.integers(1, 4000, 18)) + [1, 2200]:
        out = separate_long(AudioBuffer(rng.standard_normal((2, int(n))), 8000), model, window_seconds=0.25)
        assert list(out) == ["bass", "other"]
        assert all(b.length == n and b.channels == 2 for b in out.values())


# -- cli -------------------------------------------------------------------------------

def test_cli_plan_bands(capsys):
    assert main(["plan-bands", "--freq-bins", "2049", "--proportions", "0.175,0.392,0.433",
                 "--strides", "1,4,16", "--blocks", "3"]) == 0
    assert "cascade: 2049 -> 615 -> 185 -> 56" in capsys.readouterr().out


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code != 0
    with pytest.raises(SystemExit) as e:
        main(["plan-bands", "--bogus"])
    assert e.value.code != 0
    assert main(["plan-bands", "--proportions", "0.5,0.5,0.5"]) != 0
    assert "proportions" in capsys.readouterr().err


def test_cli_param_count(tmp_path, capsys):
    (tmp_path / "c.json").write_text("{}")
    assert main(["param-count", "--config", str(tmp_path / "c.json")]) == 0
    out = capsys.readouterr().out
    assert "9,581,094" in out and "10.08M" in out


def test_cli_pipeline(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    save_config(cfg, toy_model_config(channels=(4, 8), conv_modules=(1, 0, 0)),
                TrainConfig(segment_seconds=0.5, segment_hop_seconds=0.25, batch_size=2, steps=2))
    data = tmp_path / "data"
    assert main(["make-fixtures", "--out", str(data), "--seed", "3", "--tracks", "2", "--seconds", "1",
                 "--sample-rate", "8000", "--sources", "bass,other"]) == 0
    ckpt = tmp_path / "m.ckpt"
    assert main(["train", "--config", str(cfg), "--data", str(data), "--out", str(ckpt), "--seed", "2"]) == 0
    est = tmp_path / "est"
    assert main(["separate", "--ckpt", str(ckpt), "--input", str(data / "track00" / "mixture.wav"),
                 "--out-dir", str(est), "--window-seconds", "0.4"]) == 0
    files = sorted(p.name for p in est.iterdir())
    assert files == ["bass.wav", "other.wav"]
    n = read_wav(data / "track00" / "mixture.wav").length
    assert all(read_wav(est / f).length == n for f in files)
    assert main(["eval-sdr", "--ref-dir", str(data / "track00"), "--est-dir", str(est)]) == 0
    assert main(["bench-rtf", "--ckpt", str(ckpt), "--seconds", "0.5", "--reps", "3"]) == 0
    out = capsys.readouterr().out
    assert "median_sdr_db" in out and "rtf" in out
    assert main(["separate", "--ckpt", str(tmp_path / "missing.ckpt"), "--input", "x.wav",
                 "--out-dir", str(est)]) != 0


def test_model_config_defaults():
    cfg = ModelConfig()
    assert cfg.freq_cascade == (2049, 615, 185, 56)
    assert cfg.output_features == 16
