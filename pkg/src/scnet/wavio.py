"""RIFF/WAVE reader and writer (PCM 16/24-bit, IEEE float 32-bit, 1-2 channels)."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import WavError
from .spectral import AudioBuffer

PCM = 0x0001
IEEE_FLOAT = 0x0003
EXTENSIBLE = 0xFFFE

SUPPORTED = {(PCM, 16), (PCM, 24), (IEEE_FLOAT, 32)}


def _decode(raw: bytes, fmt: int, bits: int, channels: int) -> np.ndarray:
    if (fmt, bits) == (PCM, 16):
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif (fmt, bits) == (PCM, 24):
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    else:
        x = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return x.reshape(-1, channels).T.copy()


def read_wav(path: str | Path) -> AudioBuffer:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavError(f"{path}: truncated RIFF header at byte 0 (need 12 bytes, found {len(data)})")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavError(f"{path}: not a RIFF/WAVE file (byte 0)")

    fmt_info = None
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + 16 > len(data):
                raise WavError(f"{path}: truncated fmt chunk at byte {pos}")
            fmt, channels, rate, _, align, bits = struct.unpack_from("<HHIIHH", data, body)
            if fmt == EXTENSIBLE:
                if size < 40 or body + 26 > len(data):
                    raise WavError(f"{path}: truncated extensible fmt chunk at byte {pos}")
                fmt = struct.unpack_from("<H", data, body + 24)[0]
            if (fmt, bits) not in SUPPORTED:
                raise WavError(f"{path}: unsupported codec (format 0x{fmt:04x}, {bits} bits) in fmt chunk at byte {pos}")
            if channels not in (1, 2):
                raise WavError(f"{path}: {channels} channels unsupported (fmt chunk at byte {pos})")
            if align != channels * bits // 8:
                raise WavError(f"{path}: inconsistent block alignment {align} at byte {body + 12}")
            fmt_info = (fmt, channels, rate, bits)
        elif cid == b"data":
            if fmt_info is None:
                raise WavError(f"{path}: data chunk at byte {pos} precedes the fmt chunk")
            if body + size > len(data):
                raise WavError(
                    f"{path}: truncated data chunk at byte {pos}: declares {size} bytes, {len(data) - body} present")
            fmt, channels, rate, bits = fmt_info
            frame = channels * bits // 8
            if size % frame:
                raise WavError(f"{path}: data chunk at byte {pos} is not a whole number of frames")
            samples = _decode(data[body:body + size], fmt, bits, channels)
            if samples.shape[1] < 1:
                raise WavError(f"{path}: empty data chunk at byte {pos}")
            return AudioBuffer(samples, rate)
        pos = body + size + (size & 1)
    if fmt_info is None:
        raise WavError(f"{path}: missing fmt chunk (scanned to byte {len(data)})")
    raise WavError(f"{path}: missing data chunk (scanned to byte {len(data)})")


def write_wav(path: str | Path, audio: AudioBuffer, bits: int = 32) -> None:
    """Write ``audio``; ``bits`` 16/24 selects integer PCM, 32 selects float."""
    x = audio.samples.T  # (length, channels)
    channels = audio.channels
    if bits == 32:
        fmt, payload = IEEE_FLOAT, np.ascontiguousarray(x, dtype="<f4").tobytes()
    elif bits == 16:
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        fmt, payload = PCM, q.tobytes()
    elif bits == 24:
        q = np.clip(np.round(x * float(1 << 23)), -(1 << 23), (1 << 23) - 1).astype(np.int32)
        u = (q & 0xFFFFFF).astype("<u4").reshape(-1)
        b = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=-1).astype(np.uint8)
        fmt, payload = PCM, b.tobytes()
    else:
        raise WavError(f"unsupported bit depth {bits}; use 16, 24 or 32")
    align = channels * bits // 8
    fmt_chunk = struct.pack("<HHIIHH", fmt, channels, audio.sample_rate, audio.sample_rate * align, align, bits)
    pad = b"\x00" if len(payload) % 2 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt_chunk + b"data" + struct.pack("<I", len(payload)) + payload + pad
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
