"""Forward kernels with hand-written adjoints.

All kernels treat the last axis as the feature (channel) axis. Convolution and
recurrence kernels act along a caller-chosen ``axis``; every other leading
axis is broadcast.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np
from scipy.special import erf, expit

from ..errors import ConfigError, DimensionError, ShapeError
from .tensor import Tensor, mul, narrow

_SQRT1_2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def _flat_rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(-1, a.shape[-1])


def _to_len_axis(x: np.ndarray, axis: int) -> tuple[np.ndarray, int]:
    """Move the sequence axis next to the trailing feature axis."""
    if x.ndim < 2:
        raise ShapeError("expected at least (length, features)")
    axis = axis % x.ndim
    if axis == x.ndim - 1:
        raise ShapeError("the sequence axis cannot be the feature axis")
    return np.moveaxis(x, axis, -2), axis


# -- convolution ------------------------------------------------------------

def conv1d_strided(x: Tensor, kernel: Tensor, stride: int = 1, right_pad: int = 0, *,
                   left_pad: int = 0, bias: Tensor | None = None, axis: int = -2) -> Tensor:
    """Cross-correlation of ``x[..., L, Cin]`` with ``kernel[K, Cin, Cout]`` along ``axis``.

    Zero padding of ``left_pad``/``right_pad`` samples is applied before
    framing. Output length is ``(L + left_pad + right_pad - K) // stride + 1``.
    """
    if stride < 1 or right_pad < 0 or left_pad < 0:
        raise DimensionError(f"invalid stride/padding ({stride}, {left_pad}, {right_pad})")
    K, cin, cout = kernel.shape
    xd, ax = _to_len_axis(x.data, axis)
    if xd.shape[-1] != cin:
        raise ShapeError(f"input has {xd.shape[-1]} channels, kernel expects {cin}")
    L = xd.shape[-2]
    lp = L + left_pad + right_pad
    if lp < K:
        raise DimensionError(f"padded length {lp} shorter than kernel {K}")
    lout = (lp - K) // stride + 1
    widths = [(0, 0)] * xd.ndim
    widths[-2] = (left_pad, right_pad)
    xp = np.pad(xd, widths) if (left_pad or right_pad) else xd
    span = stride * (lout - 1) + 1
    w = kernel.data

    out = np.zeros(xd.shape[:-2] + (lout, cout))
    for k in range(K):
        out += xp[..., k:k + span:stride, :] @ w[k]
    if bias is not None:
        out += bias.data

    def backward(g):
        g = np.asarray(g)
        gm = np.moveaxis(g, ax, -2)
        gxp = np.zeros(xp.shape)
        gw = np.empty_like(w)
        g2 = _flat_rows(gm)
        for k in range(K):
            gxp[..., k:k + span:stride, :] += gm @ w[k].T
            gw[k] = _flat_rows(xp[..., k:k + span:stride, :]).T @ g2
        gx = np.moveaxis(gxp[..., left_pad:left_pad + L, :], -2, ax)
        gb = g2.sum(axis=0) if bias is not None else None
        return (gx, gw, gb)

    parents = (x, kernel) + ((bias,) if bias is not None else ())
    return Tensor._from_op(np.moveaxis(out, -2, ax), parents, backward, "conv1d_strided")


def transposed_geometry_ok(lout: int, K: int, stride: int, target_len: int) -> bool:
    """True when some right pad in [0, K) maps ``target_len`` samples onto ``lout`` frames."""
    if target_len < 1 or lout < 1:
        return False
    return any(target_len + p >= K and (target_len + p - K) // stride + 1 == lout for p in range(K))


def conv1d_transposed(y: Tensor, kernel: Tensor, stride: int, target_len: int, *,
                      bias: Tensor | None = None, axis: int = -2) -> Tensor:
    """Adjoint of :func:`conv1d_strided` (same ``kernel[K, Cin, Cout]``), cropped to ``target_len``.

    Maps ``y[..., Lout, Cout]`` to ``[..., target_len, Cin]``.
    """
    K, cin, cout = kernel.shape
    yd, ax = _to_len_axis(y.data, axis)
    if yd.shape[-1] != cout:
        raise ShapeError(f"input has {yd.shape[-1]} channels, kernel expects {cout}")
    lout = yd.shape[-2]
    if not transposed_geometry_ok(lout, K, stride, target_len):
        raise DimensionError(
            f"target length {target_len} inconsistent with {lout} frames (kernel {K}, stride {stride})")
    span = stride * (lout - 1) + 1
    full = max(span + K - 1, target_len)
    w = kernel.data

    out = np.zeros(yd.shape[:-2] + (full, cin))
    for k in range(K):
        out[..., k:k + span:stride, :] += yd @ w[k].T
    out = out[..., :target_len, :]
    if bias is not None:
        out = out + bias.data

    def backward(g):
        gm = np.moveaxis(np.asarray(g), ax, -2)
        gfull = np.zeros(gm.shape[:-2] + (full, cin))
        gfull[..., :target_len, :] = gm
        gy = np.zeros(yd.shape)
        gw = np.empty_like(w)
        y2 = _flat_rows(yd)
        for k in range(K):
            seg = gfull[..., k:k + span:stride, :]
            gy += seg @ w[k]
            gw[k] = _flat_rows(seg).T @ y2
        gb = _flat_rows(gm).sum(axis=0) if bias is not None else None
        return (np.moveaxis(gy, -2, ax), gw, gb)

    parents = (y, kernel) + ((bias,) if bias is not None else ())
    return Tensor._from_op(np.moveaxis(out, -2, ax), parents, backward, "conv1d_transposed")


def conv2d_same(x: Tensor, kernel: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 2-D cross-correlation over axes (-3, -2) with zero 'same' padding.

    ``kernel`` is ``[KH, KW, Cin, Cout]`` with odd KH, KW.
    """
    kh, kw, cin, cout = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ConfigError("same-padding needs odd kernel extents")
    if x.ndim < 3 or x.shape[-1] != cin:
        raise ShapeError(f"conv2d expects [..., H, W, {cin}], got {x.shape}")
    H, W = x.shape[-3], x.shape[-2]
    ph, pw = kh // 2, kw // 2
    widths = [(0, 0)] * (x.ndim - 3) + [(ph, ph), (pw, pw), (0, 0)]
    xp = np.pad(x.data, widths)
    w = kernel.data

    out = np.zeros(x.shape[:-1] + (cout,))
    for i in range(kh):
        for j in range(kw):
            out += xp[..., i:i + H, j:j + W, :] @ w[i, j]
    if bias is not None:
        out += bias.data

    def backward(g):
        gxp = np.zeros(xp.shape)
        gw = np.empty_like(w)
        g2 = _flat_rows(g)
        for i in range(kh):
            for j in range(kw):
                gxp[..., i:i + H, j:j + W, :] += g @ w[i, j].T
                gw[i, j] = _flat_rows(xp[..., i:i + H, j:j + W, :]).T @ g2
        gx = gxp[..., ph:ph + H, pw:pw + W, :]
        gb = g2.sum(axis=0) if bias is not None else None
        return (gx, gw, gb)

    parents = (x, kernel) + ((bias,) if bias is not None else ())
    return Tensor._from_op(out, parents, backward, "conv2d_same")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x[..., Cin] @ weight[Cin, Cout] + bias``."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: {x.shape[-1]} inputs vs weight {weight.shape}")
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data

    def backward(g):
        g2 = _flat_rows(g)
        gw = _flat_rows(x.data).T @ g2
        gb = g2.sum(axis=0) if bias is not None else None
        return (g @ weight.data.T, gw, gb)

    parents = (x, weight) + ((bias,) if bias is not None else ())
    return Tensor._from_op(out, parents, backward, "linear")


# -- normalization ------------------------------------------------------------

def group_norm(x: Tensor, groups: int, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Group normalization of ``x[B, ..., C]``.

    Statistics are taken per batch item (axis 0) and per channel group, over
    every other axis.
    """
    C = x.shape[-1]
    if groups < 1 or C % groups:
        raise ConfigError(f"{C} channels not divisible into {groups} groups")
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError("gamma/beta must have one entry per channel")
    B = x.shape[0]
    xg = x.data.reshape(B, -1, groups, C // groups)
    mu = xg.mean(axis=(1, 3), keepdims=True)
    var = xg.var(axis=(1, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xg - mu) * inv
    xhat_flat = xhat.reshape(x.shape)
    out = xhat_flat * gamma.data + beta.data

    def backward(g):
        g2 = _flat_rows(g)
        ggamma = (_flat_rows(xhat_flat) * g2).sum(axis=0)
        gbeta = g2.sum(axis=0)
        dxhat = (g * gamma.data).reshape(xg.shape)
        m1 = dxhat.mean(axis=(1, 3), keepdims=True)
        m2 = (dxhat * xhat).mean(axis=(1, 3), keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        return (gx.reshape(x.shape), ggamma, gbeta)

    return Tensor._from_op(out, (x, gamma, beta), backward, "group_norm")


# -- activations --------------------------------------------------------------

def gelu(x: Tensor) -> Tensor:
    cdf = 0.5 * (1.0 + erf(x.data * _SQRT1_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return Tensor._from_op(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),), "gelu")


def sigmoid(x: Tensor) -> Tensor:
    s = expit(x.data)
    return Tensor._from_op(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return Tensor._from_op(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def glu(x: Tensor, axis: int = -1) -> Tensor:
    """Gated linear unit: first half times sigmoid of the second half."""
    n = x.shape[axis]
    if n % 2:
        raise ShapeError(f"glu needs an even extent along axis {axis}, got {n}")
    a = narrow(x, axis, 0, n // 2)
    b = narrow(x, axis, n // 2, n // 2)
    return mul(a, sigmoid(b))


# -- recurrence ---------------------------------------------------------------

LSTM_KEYS = ("w_ih_fwd", "w_hh_fwd", "b_fwd", "w_ih_bwd", "w_hh_bwd", "b_bwd")


def _lstm_forward(xw: np.ndarray, w_hh: np.ndarray, H: int):
    """Run one direction. ``xw`` is the precomputed input projection [N, L, 4H]."""
    N, L, _ = xw.shape
    h = np.zeros((N, H))
    c = np.zeros((N, H))
    hs = np.empty((N, L, H))
    cache = np.empty((L, 6, N, H))  # i, f, g, o, c_prev, tanh(c)
    for t in range(L):
        z = xw[:, t] + h @ w_hh
        i = expit(z[:, :H])
        f = expit(z[:, H:2 * H])
        gg = np.tanh(z[:, 2 * H:3 * H])
        o = expit(z[:, 3 * H:])
        c_prev = c
        c = f * c_prev + i * gg
        tc = np.tanh(c)
        h = o * tc
        hs[:, t] = h
        cache[t] = (i, f, gg, o, c_prev, tc)
    return hs, cache


def _lstm_backward(gh: np.ndarray, hs: np.ndarray, cache: np.ndarray, w_hh: np.ndarray):
    N, L, H = gh.shape
    dz_all = np.empty((N, L, 4 * H))
    gw_hh = np.zeros_like(w_hh)
    dh_next = np.zeros((N, H))
    dc_next = np.zeros((N, H))
    for t in range(L - 1, -1, -1):
        i, f, gg, o, c_prev, tc = cache[t]
        dh = gh[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate(
            (dc * gg * i * (1.0 - i), dc * c_prev * f * (1.0 - f), dc * i * (1.0 - gg * gg), do * o * (1.0 - o)),
            axis=1)
        dc_next = dc * f
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((N, H))
        gw_hh += h_prev.T @ dz
        dh_next = dz @ w_hh.T
        dz_all[:, t] = dz
    return dz_all, gw_hh


def bidirectional_recurrent(x: Tensor, params: Mapping[str, Tensor], hidden: int, axis: int = -2) -> Tensor:
    """Bidirectional LSTM along ``axis`` of ``x[..., L, C]``; returns ``[..., L, 2*hidden]``.

    Gate order in the fused weights is (input, forget, cell, output). The
    forward direction fills features ``[0, hidden)``, the backward direction
    ``[hidden, 2*hidden)``.
    """
    xd, ax = _to_len_axis(x.data, axis)
    lead, (L, C) = xd.shape[:-2], xd.shape[-2:]
    H = hidden
    for d in ("fwd", "bwd"):
        if params[f"w_ih_{d}"].shape != (C, 4 * H) or params[f"w_hh_{d}"].shape != (H, 4 * H) \
                or params[f"b_{d}"].shape != (4 * H,):
            raise ShapeError(f"recurrent parameters do not match input {C} / hidden {H}")
    if L < 1:
        raise DimensionError("empty sequence")
    x3 = xd.reshape(-1, L, C)

    runs = {}
    for d in ("fwd", "bwd"):
        seq = x3 if d == "fwd" else x3[:, ::-1]
        xw = seq @ params[f"w_ih_{d}"].data + params[f"b_{d}"].data
        hs, cache = _lstm_forward(xw, params[f"w_hh_{d}"].data, H)
        runs[d] = (seq, hs, cache)
    out = np.concatenate((runs["fwd"][1], runs["bwd"][1][:, ::-1]), axis=-1)
    out = np.moveaxis(out.reshape(lead + (L, 2 * H)), -2, ax)

    def backward(g):
        g3 = np.moveaxis(np.asarray(g), ax, -2).reshape(-1, L, 2 * H)
        gx = np.zeros_like(x3)
        grads = []
        for d in ("fwd", "bwd"):
            seq, hs, cache = runs[d]
            gh = g3[..., :H] if d == "fwd" else g3[:, ::-1, H:]
            dz, gw_hh = _lstm_backward(np.ascontiguousarray(gh), hs, cache, params[f"w_hh_{d}"].data)
            w_ih = params[f"w_ih_{d}"].data
            gseq = dz @ w_ih.T
            gx += gseq if d == "fwd" else gseq[:, ::-1]
            grads += [_flat_rows(seq).T @ _flat_rows(dz), gw_hh, dz.reshape(-1, 4 * H).sum(axis=0)]
        gx = np.moveaxis(gx.reshape(lead + (L, C)), -2, ax)
        return (gx, *grads)

    parents = (x,) + tuple(params[k] for k in LSTM_KEYS)
    return Tensor._from_op(out, parents, backward, "bidirectional_recurrent")


# -- real FFT along an axis -----------------------------------------------------

def rfft_axis(x: Tensor, axis: int) -> tuple[Tensor, Tensor]:
    """Non-redundant half of the DFT along ``axis`` as separate real/imaginary tensors."""
    L = x.shape[axis]
    if L < 2:
        raise DimensionError("rfft needs at least two samples")
    spec = np.fft.rfft(x.data, axis=axis)
    K = spec.shape[axis]

    def adjoint(gc: np.ndarray) -> np.ndarray:
        # d/dx of <g_re, Re X> + <g_im, Im X> is Re(sum_k G_k e^{+i 2 pi k n / L})
        pad = [(0, 0)] * gc.ndim
        pad[axis % gc.ndim] = (0, L - K)
        return L * np.fft.ifft(np.pad(gc, pad), axis=axis).real

    re = Tensor._from_op(spec.real, (x,), lambda g: (adjoint(g.astype(complex)),), "rfft_re")
    im = Tensor._from_op(spec.imag, (x,), lambda g: (adjoint(1j * g),), "rfft_im")
    return re, im


def _half_spectrum_weights(L: int, K: int) -> np.ndarray:
    w = np.full(K, 2.0)
    w[0] = 1.0
    if L % 2 == 0:
        w[-1] = 1.0
    return w


def irfft_axis(re: Tensor, im: Tensor, target_len: int, axis: int) -> Tensor:
    """Inverse of :func:`rfft_axis` producing exactly ``target_len`` real samples."""
    K = target_len // 2 + 1
    if re.shape != im.shape or re.shape[axis] != K:
        raise DimensionError(f"irfft to length {target_len} needs {K} bins, got {re.shape[axis]}")
    out = np.fft.irfft(re.data + 1j * im.data, n=target_len, axis=axis)
    shape = [1] * re.ndim
    shape[axis % re.ndim] = K
    w = (_half_spectrum_weights(target_len, K) / target_len).reshape(shape)

    def backward(g):
        G = np.fft.rfft(g, axis=axis) * w
        return (G.real, G.imag)

    return Tensor._from_op(out, (re, im), backward, "irfft")
