"""Encoder, separator, decoder and whole-model contracts."""

import numpy as np
import pytest
from conftest import random_tree, zero_tree

from scnet import params as P
from scnet.bandplan import BandSplitSpec, cascade, plan
from scnet.config import DualPathConfig, ModelConfig, toy_model_config
from scnet.decoder import fusion_forward, fusion_specs, su_layer_forward, su_layer_specs
from scnet.encoder import (
    ConvModuleConfig,
    SDBlockConfig,
    conv_module_forward,
    conv_module_specs,
    encoder_blocks,
    encoder_forward,
    encoder_specs,
    sd_block_forward,
    sd_block_specs,
    sd_layer_forward,
    sd_layer_specs,
)
from scnet.errors import ConfigError, DimensionError
from scnet.model import SCNet, model_forward, model_specs, param_count
from scnet.numerics import Tensor, conv1d_strided, grad_check, make_rng, no_grad, square, tsum
from scnet.separator import (
    dual_path_layer_forward,
    dual_path_layer_specs,
    separator_forward,
    separator_specs,
    time_irfft_convert,
    time_rfft_convert,
)


def check_tree(fn, x, tree, max_checks=None, seed=0):
    """grad_check of ``fn(x, tree)`` w.r.t. the input and every parameter."""
    flat = P.flatten(tree)
    names = list(flat)

    def f(x_, *ps):
        return fn(x_, P.unflatten(dict(zip(names, ps))))

    return grad_check(f, [x] + [flat[n].data for n in names], max_checks=max_checks, seed=seed)


def weighted_sum(y, seed=99):
    w = make_rng(seed).standard_normal(y.shape)
    return tsum(y * Tensor(w))


# -- encoder -----------------------------------------------------------------

def test_conv_module_zero_branch_is_identity(rng):
    cfg = ConvModuleConfig(8)
    x = Tensor(rng.standard_normal((2, 7, 3, 8)))
    y = conv_module_forward(x, cfg, zero_tree(conv_module_specs(cfg)))
    np.testing.assert_array_equal(y.data, x.data)


@pytest.mark.parametrize("shape", [(1, 5, 2, 8), (2, 9, 4, 16), (1, 1, 1, 4)])
def test_conv_module_shape(shape, rng):
    cfg = ConvModuleConfig(shape[-1])
    y = conv_module_forward(Tensor(rng.standard_normal(shape)), cfg, random_tree(conv_module_specs(cfg)))
    assert y.shape == shape


def test_conv_module_grad(rng):
    cfg = ConvModuleConfig(8)
    x = rng.standard_normal((1, 8, 3, 8))
    err = check_tree(lambda x_, p: weighted_sum(conv_module_forward(x_, cfg, p)), x,
                     random_tree(conv_module_specs(cfg)), max_checks=6)
    assert err <= 1e-3


def test_sd_layer_default_width():
    p = plan(2049, BandSplitSpec())
    x = Tensor(np.ones((1, 2049, 1, 4)))
    y = sd_layer_forward(x, p, random_tree(sd_layer_specs(p, 4, 8)), 8)
    assert y.shape == (1, 615, 1, 8)


def test_sd_layer_identity_geometry(rng):
    p = plan(30, BandSplitSpec((0.2, 0.3, 0.5), (1, 1, 1)))
    tree = zero_tree(sd_layer_specs(p, 4, 4))
    for band in tree.values():
        band["w"].data[0] = np.eye(4)
    x = rng.standard_normal((2, 30, 3, 4))
    y = sd_layer_forward(Tensor(x), p, tree, 4)
    from scipy.special import erf
    np.testing.assert_allclose(y.data, 0.5 * x * (1 + erf(x / np.sqrt(2))), atol=1e-12)


def test_sd_layer_grad(rng):
    p = plan(20, BandSplitSpec((0.25, 0.35, 0.4), (1, 2, 4)))
    x = rng.standard_normal((1, 20, 2, 4))
    err = check_tree(lambda x_, t: weighted_sum(sd_layer_forward(x_, p, t, 8)), x,
                     random_tree(sd_layer_specs(p, 4, 8)), max_checks=8)
    assert err <= 1e-3


def _toy_block(counts=(2, 1, 1), F=24, cin=4, cout=8):
    return SDBlockConfig(plan(F, BandSplitSpec((0.25, 0.35, 0.4), (1, 2, 4))), cin, cout, counts)


def test_sd_block_without_conv_modules_is_sd_layer(rng):
    block = _toy_block((0, 0, 0))
    tree = random_tree(sd_block_specs(block))
    assert set(tree) == {"sd"}
    x = Tensor(rng.standard_normal((1, 24, 3, 4)))
    out, skip = sd_block_forward(x, block, tree)
    np.testing.assert_array_equal(out.data, sd_layer_forward(x, block.plan, tree["sd"], 8).data)
    np.testing.assert_array_equal(skip.data, x.data)


def test_sd_block_output_channels_and_grad(rng):
    block = _toy_block()
    tree = random_tree(sd_block_specs(block))
    x = rng.standard_normal((1, 24, 2, 4))
    out, skip = sd_block_forward(Tensor(x), block, tree)
    assert out.shape == (1, block.plan.output_width, 2, 8)
    assert skip.shape == x.shape
    err = check_tree(lambda x_, t: weighted_sum(sd_block_forward(x_, block, t)[0]), x, tree, max_checks=4)
    assert err <= 1e-3


def test_encoder_defaults():
    cfg = ModelConfig()
    tree = P.unflatten(P.initialize(encoder_specs(cfg), 0))
    x = make_rng(0).standard_normal((1, 2049, 2, 4))
    with no_grad():
        latent, skips = encoder_forward(Tensor(x), cfg, tree)
        zero_latent, _ = encoder_forward(Tensor(np.zeros_like(x)), cfg, tree)
    assert latent.shape == (1, 56, 2, 128)
    assert [s.shape for s in skips] == [(1, 2049, 2, 4), (1, 615, 2, 32), (1, 185, 2, 64)]
    assert not zero_latent.data.any()


def _oracle_cascade(F, props, strides, n):
    widths = [F]
    for _ in range(n):
        f = widths[-1]
        lo, mid = int(props[0] * f), int(props[1] * f)
        ws = (lo, mid, f - lo - mid)
        widths.append(sum(-(-w // s) for w, s in zip(ws, strides)))
    return widths


def test_encoder_bookkeeping_matches_bandplan():
    rng = make_rng(21)
    done = 0
    while done < 50:
        raw = rng.uniform(0.1, 1.0, 3)
        props = tuple(raw / raw.sum())
        strides = tuple(int(s) for s in rng.integers(1, 9, 3))
        hop = int(rng.integers(4, 17))
        fft = hop * int(rng.choice([2, 4]))
        if fft % 2:
            continue
        try:
            cfg = ModelConfig(sample_rate=8000, fft_size=fft, hop=hop, proportions=props, strides=strides,
                              channels=(4, 8), conv_modules=(1, 0, 0),
                              dual_path=DualPathConfig(2, 2, 4), sources=("a",))
        except ConfigError:
            continue
        oracle = _oracle_cascade(cfg.stft.bins, props, strides, 2)
        if min(oracle[:-1]) < 3:
            continue
        tree = random_tree(encoder_specs(cfg), seed=done)
        with no_grad():
            latent, skips = encoder_forward(Tensor(np.ones((1, cfg.stft.bins, 1, 4))), cfg, tree)
        assert [s.shape[1] for s in skips] + [latent.shape[1]] == oracle
        assert list(cfg.freq_cascade) == oracle
        done += 1


def test_encoder_block_is_band_local(rng):
    block = _toy_block((2, 1, 1), F=40)
    tree = random_tree(sd_block_specs(block))
    x = rng.standard_normal((1, 40, 3, 4))
    high = block.plan.bands[2]
    x_cut = x.copy()
    x_cut[:, high.start:] = 0.0
    y = sd_block_forward(Tensor(x), block, tree)[0].data
    y_cut = sd_block_forward(Tensor(x_cut), block, tree)[0].data
    lo_end = high.out_start
    np.testing.assert_array_equal(y[:, :lo_end], y_cut[:, :lo_end])
    assert np.abs(y[:, lo_end:] - y_cut[:, lo_end:]).max() > 0


# -- separator ----------------------------------------------------------------

def test_dual_path_zero_projection_is_identity(rng):
    tree = random_tree(dual_path_layer_specs(8, 4))
    for pas in tree.values():
        pas["proj_w"].data[:] = 0
        pas["proj_b"].data[:] = 0
    x = rng.standard_normal((2, 4, 5, 8))
    np.testing.assert_array_equal(dual_path_layer_forward(Tensor(x), 4, tree).data, x)


@pytest.mark.parametrize("shape", [(1, 3, 2, 4), (2, 4, 5, 8), (1, 1, 7, 8)])
def test_dual_path_shape(shape, rng):
    tree = random_tree(dual_path_layer_specs(shape[-1], 3))
    assert dual_path_layer_forward(Tensor(rng.standard_normal(shape)), 3, tree).shape == shape


@pytest.mark.parametrize("time_first", [True, False])
def test_dual_path_grad(time_first, rng):
    x = rng.standard_normal((1, 4, 5, 8))
    err = check_tree(lambda x_, t: weighted_sum(dual_path_layer_forward(x_, 4, t, time_first=time_first)), x,
                     random_tree(dual_path_layer_specs(8, 4), scale=0.3), max_checks=5)
    assert err <= 1e-3


def test_time_convert_dc_and_extents():
    y = np.broadcast_to(make_rng(0).standard_normal((2, 3, 1, 4)), (2, 3, 6, 4)).copy()
    out = time_rfft_convert(Tensor(y)).data
    assert out.shape == (2, 3, 4, 8)
    assert np.abs(out[:, :, 1:]).max() < 1e-12
    assert np.abs(out[..., 4:]).max() < 1e-12
    np.testing.assert_allclose(out[:, :, 0, :4], 6 * y[:, :, 0], atol=1e-12)


@pytest.mark.parametrize("T", [2, 3, 8, 11])
def test_time_convert_round_trip(T, rng):
    y = rng.standard_normal((2, 3, T, 4))
    back = time_irfft_convert(time_rfft_convert(Tensor(y)), T).data
    assert np.abs(back - y).max() <= 1e-6


def test_time_inverse_zero_and_linear(rng):
    assert not time_irfft_convert(Tensor(np.zeros((1, 2, 4, 6))), 7).data.any()
    a, b = rng.standard_normal((2, 1, 2, 4, 6))
    lhs = time_irfft_convert(Tensor(2 * a - b), 6).data
    rhs = 2 * time_irfft_convert(Tensor(a), 6).data - time_irfft_convert(Tensor(b), 6).data
    assert np.abs(lhs - rhs).max() <= 1e-6
    with pytest.raises(DimensionError):
        time_irfft_convert(Tensor(a), 9)


def test_separator_zero_weights_identity(rng):
    cfg = DualPathConfig(4, 3, 6)
    x = rng.standard_normal((1, 5, 7, 8))
    out = separator_forward(Tensor(x), cfg, zero_tree(separator_specs(cfg, 8)))
    assert np.abs(out.data - x).max() <= 1e-6


@pytest.mark.parametrize("shape", [(1, 3, 4, 8), (2, 2, 5, 4)])
def test_separator_shape_and_grad(shape, rng):
    cfg = DualPathConfig(2, 2, 4)
    tree = random_tree(separator_specs(cfg, shape[-1]), scale=0.3)
    x = rng.standard_normal(shape)
    assert separator_forward(Tensor(x), cfg, tree).shape == shape
    err = check_tree(lambda x_, t: weighted_sum(separator_forward(x_, cfg, t)), x, tree, max_checks=3)
    assert err <= 1e-3


def test_separator_widths_at_defaults():
    specs = separator_specs(DualPathConfig(), 128)
    assert specs["layer1"]["time"]["proj_w"].shape == (512, 256)
    assert specs["layer0"]["time"]["w_ih_fwd"].shape == (128, 512)
    with pytest.raises(ConfigError):
        DualPathConfig(6, 128, 128)
    with pytest.raises(ConfigError):
        DualPathConfig(3, 4, 8)


# -- decoder -----------------------------------------------------------------

def _identity_fusion(C):
    tree = zero_tree(fusion_specs(C))
    tree["w"].data[1, 1] = np.eye(2 * C)
    return tree


def test_fusion_identity_conv_is_swish(rng):
    s, u = rng.standard_normal((2, 1, 5, 4, 4))
    out = fusion_forward(Tensor(s), Tensor(u), _identity_fusion(4)).data
    z = s + u
    np.testing.assert_allclose(out, z / (1 + np.exp(-z)), atol=1e-12)
    out0 = fusion_forward(Tensor(s), Tensor(np.zeros_like(s)), _identity_fusion(4)).data
    np.testing.assert_allclose(out0, s / (1 + np.exp(-s)), atol=1e-12)


def test_fusion_grad(rng):
    s, u = rng.standard_normal((2, 1, 4, 3, 4))
    tree = random_tree(fusion_specs(4), scale=0.3)
    err = grad_check(lambda a, b, w, bias: weighted_sum(fusion_forward(a, b, {"w": w, "b": bias})),
                     [s, u, tree["w"].data, tree["b"].data], max_checks=20)
    assert err <= 1e-3


def test_su_geometry_random_plans():
    rng = make_rng(8)
    done = 0
    while done < 100:
        raw = rng.uniform(0.05, 1.0, 3)
        spec = BandSplitSpec(tuple(raw / raw.sum()), tuple(int(s) for s in rng.integers(1, 17, 3)))
        try:
            p = plan(int(rng.integers(6, 300)), spec)
        except ConfigError:
            continue
        y = su_layer_forward(Tensor(np.ones((1, p.output_width, 1, 2))), p, random_tree(su_layer_specs(p, 2, 3)), 3)
        assert y.shape == (1, p.input_width, 1, 3)
        done += 1


def test_su_stride_one_identity(rng):
    p = plan(12, BandSplitSpec((0.25, 0.25, 0.5), (1, 1, 1)))
    tree = zero_tree(su_layer_specs(p, 3, 3))
    for band in tree.values():
        band["w"].data[0] = np.eye(3)
    x = rng.standard_normal((1, 12, 2, 3))
    np.testing.assert_array_equal(su_layer_forward(Tensor(x), p, tree, 3).data, x)


def test_su_adjoint_of_sd_per_band(rng):
    p = plan(50, BandSplitSpec((0.2, 0.3, 0.5), (1, 4, 16)))
    for b in p.bands:
        k = rng.standard_normal((b.stride, 3, 5))
        x = rng.standard_normal((1, b.width, 2, 3))
        y = rng.standard_normal((1, b.out_width, 2, 5))
        down = conv1d_strided(Tensor(x), Tensor(k), b.stride, b.right_pad, axis=1).data
        tree = {bb.name: {"w": Tensor(k), "b": Tensor(np.zeros(3))} for bb in p.bands}
        yfull = np.zeros((1, p.output_width, 2, 5))
        yfull[:, b.out_start:b.out_start + b.out_width] = y
        up = su_layer_forward(Tensor(yfull), p, tree, 3).data[:, b.start:b.start + b.width]
        assert abs(np.sum(down * y) - np.sum(x * up)) <= 1e-6 * max(1.0, abs(np.sum(down * y)))


@pytest.fixture(scope="module")
def default_model():
    return SCNet(ModelConfig(), seed=0)


def test_default_model_output_shape(default_model):
    x = make_rng(0).standard_normal((1, 2049, 3, 4))
    y = default_model.infer(x)
    assert y.shape == (1, 4, 2049, 3, 4)


def test_single_source():
    cfg = toy_model_config(sources=("vocals",))
    y = SCNet(cfg).infer(np.ones((2, 64, 5, 4)))
    assert y.shape == (2, 1, 64, 5, 4)


def test_shape_contract_random_inputs():
    model = SCNet(toy_model_config())
    rng = make_rng(4)
    for T in (2, 3, 9):
        B = int(rng.integers(1, 3))
        y = model.infer(rng.standard_normal((B, 64, T, 4)))
        assert y.shape == (B, 2, 64, T, 4)


def test_toy_model_grad():
    cfg = toy_model_config()
    flat = SCNet(cfg, seed=3).params
    tree = P.unflatten(flat)
    rng = make_rng(5)
    x = rng.standard_normal((1, 64, 8, 4))
    ref = Tensor(rng.standard_normal((1, 2, 64, 8, 4)))

    def loss(x_, t):
        return tsum(square(model_forward(x_, cfg, t) - ref))

    assert check_tree(loss, x, tree, max_checks=2) <= 1e-3


# -- params and counting -----------------------------------------------------

def test_hand_count_small_config():
    C, H = 8, 2
    cfg = ModelConfig(sample_rate=8000, fft_size=62, hop=31, channels=(C,), conv_modules=(0, 0, 0),
                      dual_path=DualPathConfig(2, H, 2 * H), sources=("a",))
    # encoder: one SD layer 4 -> 8, kernels (1, 4, 16)
    enc = sum(s * 4 * C + C for s in (1, 4, 16))
    # decoder: one SU layer 8 -> 4 (bottom stage, no fusion)
    dec = sum(s * C * 4 + 4 for s in (1, 4, 16))

    def rnn(ch, h):
        return 2 * ch + 2 * (ch * 4 * h + h * 4 * h + 4 * h) + 2 * h * ch + ch

    sep = 2 * rnn(C, H) + 2 * rnn(2 * C, 2 * H)
    total, breakdown = param_count(cfg)
    assert total == enc + dec + sep
    assert sum(breakdown.values()) == total
    assert SCNet(cfg).num_parameters() == total


def test_count_monotone_in_ladder():
    counts = [param_count(ModelConfig(channels=ch))[0] for ch in [(8, 16, 32), (16, 32, 64), (32, 64, 128)]]
    assert counts == sorted(counts) and len(set(counts)) == 3


def test_default_count_breakdown():
    total, breakdown = param_count(ModelConfig())
    assert total == 9_581_094
    assert sum(breakdown.values()) == total
    assert total == P.count(model_specs(ModelConfig()))


def test_init_is_deterministic():
    a = SCNet(toy_model_config(), seed=7).params
    b = SCNet(toy_model_config(), seed=7).params
    c = SCNet(toy_model_config(), seed=8).params
    assert all(np.array_equal(a[k].data, b[k].data) for k in a)
    assert any(not np.array_equal(a[k].data, c[k].data) for k in a)


def test_init_bounds():
    flat = P.flatten(model_specs(toy_model_config()))
    params = SCNet(toy_model_config()).params
    for name, spec in flat.items():
        v = params[name].data
        if spec.init == "uniform":
            assert np.abs(v).max() <= np.sqrt(1.0 / spec.fan_in)
        elif spec.init == "zeros":
            assert not v.any()
        else:
            assert (v == 1).all()


def test_encoder_blocks_follow_cascade():
    cfg = ModelConfig()
    blocks = encoder_blocks(cfg)
    assert [b.plan.input_width for b in blocks] == list(cascade(2049, cfg.band_spec, 3).widths[:-1])
    assert [(b.in_channels, b.out_channels) for b in blocks] == [(4, 32), (32, 64), (64, 128)]
