import math

import numpy as np
import pytest

from sestream.checkpoint import load_checkpoint, model_from_checkpoint, save_checkpoint
from sestream.errors import ConfigError, DataError, DomainError, ShapeError, StateError
from sestream.grad import Tensor, conv2d, no_grad, pad4
from sestream.schedule import inference_schedule
from sestream.sde import BbedParams
from sestream.spectral import Spectrogram
from sestream.unet import (
    BlockCausalUNet,
    UNetConfig,
    bc_downsample,
    bc_upsample,
    fourier_features,
    left_pad_amount,
)

from conftest import complex_randn


def tiny_diffusion_cfg(**over):
    base = dict(
        stage_channels=(3, 4, 3),
        time_strides=(2, 2),
        freq_strides=(2, 2),
        time_kernels=(3, 3),
        freq_kernels=(3, 3),
        fourier_dim=8,
        mode="diffusion",
        buffer_len=4,
        groups=2,
    )
    base.update(over)
    return UNetConfig(**base)


def tiny_predictive_cfg(**over):
    base = dict(
        stage_channels=(3, 4, 3),
        time_strides=(2, 2),
        freq_strides=(2, 2),
        time_kernels=(3, 3),
        freq_kernels=(3, 3),
        mode="predictive",
        groups=2,
    )
    base.update(over)
    return UNetConfig(**base)


# ------------------------------------------------------------- pad formula


def test_left_pad_worked_example():
    assert left_pad_amount(7, 3, 2) == 2


def test_left_pad_collapses_when_divisible():
    for s in (1, 2, 3, 4):
        assert left_pad_amount(8 * s, s, s) == 0


def test_left_pad_kernel_must_cover_stride():
    with pytest.raises(ConfigError):
        left_pad_amount(10, 2, 3)
    with pytest.raises(DomainError):
        left_pad_amount(0, 3, 2)


# ----------------------------------------------------------- down/upsample


def test_bc_downsample_fig_shapes(rng):
    # length 7, kernel 3, stride 2: 4 outputs, first sees two zeros, last sees none
    w = Tensor(np.ones((1, 1, 1, 3)))
    x = rng.standard_normal((1, 1, 1, 7))
    out = bc_downsample(Tensor(x), w, (1, 2)).data
    assert out.shape[3] == 4
    padded = np.concatenate([np.zeros((1, 1, 1, 2)), x], axis=3)
    for m in range(4):
        assert abs(out[0, 0, 0, m] - padded[0, 0, 0, 2 * m : 2 * m + 3].sum()) < 1e-12
    # last window covers x[4:7]: no padding zeros involved
    assert abs(out[0, 0, 0, 3] - x[0, 0, 0, 4:7].sum()) < 1e-12


def test_bc_downsample_never_consumes_right_sentinels(rng):
    # appending NaN sentinels on the right and keeping the same output count
    # must not poison any output: windows never extend past the newest frame
    for n in range(1, 33):
        for k in range(1, 6):
            for s in range(1, k + 1):
                x = rng.standard_normal((1, 1, 1, n))
                w = Tensor(np.ones((1, 1, 1, k)))
                out = bc_downsample(Tensor(x), w, (1, s)).data
                assert out.shape[3] == math.ceil(n / s)
                p = left_pad_amount(n, k, s)
                sentinel = np.concatenate(
                    [np.zeros((1, 1, 1, p)), x, np.full((1, 1, 1, k), np.nan)], axis=3
                )
                raw = conv2d(Tensor(sentinel), w, (1, s)).data[:, :, :, : out.shape[3]]
                assert np.all(np.isfinite(raw))
                np.testing.assert_allclose(raw, out, atol=1e-12)


def test_bc_downsample_zero_input():
    w = Tensor(np.ones((1, 1, 1, 3)))
    out = bc_downsample(Tensor(np.zeros((1, 1, 1, 9))), w, (1, 2)).data
    assert np.all(out == 0)


def test_bc_downsample_streaming_prefix(rng):
    # appending stride-multiples of future frames leaves earlier outputs unchanged
    w = Tensor(rng.standard_normal((1, 1, 1, 3)))
    x = rng.standard_normal((1, 1, 1, 12))
    base = bc_downsample(Tensor(x), w, (1, 2)).data
    for extra in (2, 4, 6):
        grown = np.concatenate([x, rng.standard_normal((1, 1, 1, extra))], axis=3)
        out = bc_downsample(Tensor(grown), w, (1, 2)).data
        np.testing.assert_allclose(out[:, :, :, : base.shape[3]], base, atol=1e-12)


def test_bc_upsample_fig_shapes(rng):
    # the paper-scale example: 4 tokens back up to 7, one raw token dropped per side
    w = Tensor(rng.standard_normal((1, 1, 1, 3)))
    h = rng.standard_normal((1, 1, 1, 4))
    out = bc_upsample(Tensor(h), w, (1, 2), 1, 7)
    assert out.data.shape[3] == 7
    from sestream.grad import conv_transpose2d

    raw = conv_transpose2d(Tensor(h), w, (1, 2)).data
    assert raw.shape[3] == 9
    np.testing.assert_allclose(out.data[0, 0, 0], raw[0, 0, 0, 1:8], atol=1e-14)


def test_down_up_preserves_length_exhaustive(rng):
    for n in range(1, 33):
        for k in range(1, 6):
            for s in range(1, k + 1):
                x = rng.standard_normal((1, 1, 1, n))
                wd = Tensor(rng.standard_normal((1, 1, 1, k)))
                wu = Tensor(rng.standard_normal((1, 1, 1, k)))
                h = bc_downsample(Tensor(x), wd, (1, s))
                out = bc_upsample(h, wu, (1, s), 1, n)
                assert out.data.shape[3] == n, (n, k, s)


def test_bc_upsample_zero_input(rng):
    w = Tensor(rng.standard_normal((1, 1, 1, 3)))
    out = bc_upsample(Tensor(np.zeros((1, 1, 1, 4))), w, (1, 2), 1, 7).data
    assert np.all(out == 0)


def test_bc_upsample_impulse_centering(rng):
    # with s | n the grid is exact: input token m lands centered at position m*s
    w = Tensor(np.array([[[[1.0, 2.0, 3.0]]]]))
    h = np.zeros((1, 1, 1, 4))
    h[0, 0, 0, 2] = 1.0
    out = bc_upsample(Tensor(h), w, (1, 2), 1, 8).data[0, 0, 0]
    expected = np.zeros(8)
    expected[4:7] = [1.0, 2.0, 3.0]
    np.testing.assert_allclose(out, expected, atol=1e-14)


def test_bc_upsample_shape_guard(rng):
    w = Tensor(rng.standard_normal((1, 1, 1, 3)))
    with pytest.raises(ShapeError):
        bc_upsample(Tensor(np.zeros((1, 1, 1, 2))), w, (1, 2), 1, 20)


# ------------------------------------------------------------------ config


def test_config_validation():
    with pytest.raises(ConfigError):
        UNetConfig(stage_channels=(4, 4), time_strides=(2, 2))
    with pytest.raises(ConfigError):
        tiny_diffusion_cfg(buffer_len=8)  # global stride 4 != 8
    with pytest.raises(ConfigError):
        tiny_diffusion_cfg(time_kernels=(1, 3))  # kernel below stride
    with pytest.raises(ConfigError):
        tiny_diffusion_cfg(mode="nonsense")
    with pytest.raises(ConfigError):
        tiny_diffusion_cfg(fourier_dim=7)
    assert tiny_diffusion_cfg().global_stride == 4
    assert tiny_diffusion_cfg().in_channels == 4
    assert tiny_predictive_cfg().in_channels == 2


def test_fourier_features_shape_determinism():
    steps = np.linspace(0.03, 0.999, 4)
    f1 = fourier_features(steps, 8)
    f2 = fourier_features(steps, 8)
    assert f1.shape == (8, 4)
    np.testing.assert_array_equal(f1, f2)


# ----------------------------------------------------------------- forward


def test_forward_output_shape(rng):
    cfg = UNetConfig(
        stage_channels=(4, 6, 6, 6, 4),
        time_strides=(2, 2, 2, 2),
        freq_strides=(2, 2, 2, 2),
        time_kernels=(3, 3, 3, 3),
        freq_kernels=(3, 3, 3, 3),
        mode="diffusion",
        buffer_len=16,
        fourier_dim=16,
        groups=2,
    )
    net = BlockCausalUNet(cfg, seed=0)
    sched = inference_schedule(16, BbedParams())
    F, K = 64, 64
    v = Spectrogram(complex_randn(rng, (F, K), 0.2), compressed=True)
    y = Spectrogram(complex_randn(rng, (F, K), 0.2), compressed=True)
    with no_grad():
        out = net.forward(v, y, sched)
    assert out.shape == (F, 16)
    assert out.dtype == np.complex128


def test_forward_domain_errors(rng):
    cfg = tiny_diffusion_cfg()
    net = BlockCausalUNet(cfg, seed=0)
    p = BbedParams()
    sched = inference_schedule(4, p)
    v = Spectrogram(complex_randn(rng, (8, 2), 0.1), compressed=True)
    y = Spectrogram(complex_randn(rng, (8, 2), 0.1), compressed=True)
    with pytest.raises(DomainError):
        net.forward(v, y, sched)  # K=2 < B=4
    v8 = Spectrogram(complex_randn(rng, (8, 8), 0.1), compressed=True)
    y8 = Spectrogram(complex_randn(rng, (8, 8), 0.1), compressed=True)
    with pytest.raises(DomainError):
        net.forward(v8, y8, inference_schedule(6, p))
    with pytest.raises(StateError):
        net.forward(Spectrogram(v8.data, compressed=False), y8, sched)
    with pytest.raises(StateError):
        net.forward_predictive(y8)


def test_forward_cached_embeddings_bit_identical(rng):
    cfg = tiny_diffusion_cfg()
    net = BlockCausalUNet(cfg, seed=0)
    sched = inference_schedule(4, BbedParams())
    v = Spectrogram(complex_randn(rng, (8, 8), 0.1), compressed=True)
    y = Spectrogram(complex_randn(rng, (8, 8), 0.1), compressed=True)
    with no_grad():
        a = net.forward(v, y, sched)
        b = net.forward(v, y, sched)
    np.testing.assert_array_equal(a, b)
    assert len(net._temb_cache) == 1


def test_forward_block_lookahead_invariance(rng):
    # perturbing input blocks after block i leaves output block i unchanged
    cfg = tiny_diffusion_cfg()
    net = BlockCausalUNet(cfg, seed=2)
    sched = inference_schedule(4, BbedParams())
    F, K, B = 8, 16, 4
    v = complex_randn(rng, (F, K), 0.3)
    y = complex_randn(rng, (F, K), 0.3)
    with no_grad():
        base = net.forward(
            Spectrogram(v, compressed=True), Spectrogram(y, compressed=True), sched
        )
        # output covers the last B frames: one full block (g == B)
        v2 = v.copy()
        y2 = y.copy()
        v2[:, K - 1] += 1.0 + 0.5j  # newest frame: inside the last block
        out = net.forward(
            Spectrogram(v2, compressed=True), Spectrogram(y2, compressed=True), sched
        )
    # within the buffer block, token i may look ahead g - i frames: the final
    # token always changes, earlier tokens only through their block membership
    assert np.any(out != base)


def test_predictive_empty_input(rng):
    net = BlockCausalUNet(tiny_predictive_cfg(), seed=0)
    y = Spectrogram(np.zeros((8, 0), dtype=complex), compressed=True)
    out = net.forward_predictive(y)
    assert out.shape == (8, 0)


def test_zero_head_gives_zero_output(rng):
    net = BlockCausalUNet(tiny_predictive_cfg(), seed=0)
    net.params["head_w"].data[:] = 0.0
    net.params["head_b"].data[:] = 0.0
    y = Spectrogram(complex_randn(rng, (8, 12), 0.4), compressed=True)
    assert np.all(net.forward_predictive(y) == 0)


def test_predictive_length_preserved_many_lengths(rng):
    net = BlockCausalUNet(tiny_predictive_cfg(), seed=1)
    for n in (1, 2, 3, 5, 8, 13, 21):
        y = Spectrogram(complex_randn(rng, (8, n), 0.3), compressed=True)
        assert net.forward_predictive(y).shape == (8, n)


# -------------------------------------------------------------- checkpoint


def test_checkpoint_roundtrip(tmp_path, rng):
    cfg = tiny_diffusion_cfg()
    net = BlockCausalUNet(cfg, seed=7)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net, extra={"counter": np.arange(3.0)}, meta={"note": "test"})
    model2, extra, meta = model_from_checkpoint(path)
    assert meta["note"] == "test"
    np.testing.assert_array_equal(extra["counter"], np.arange(3.0))
    for name, p in net.params:
        np.testing.assert_array_equal(p.data, model2.params[name].data)
    sched = inference_schedule(4, BbedParams())
    v = Spectrogram(complex_randn(rng, (8, 8), 0.2), compressed=True)
    y = Spectrogram(complex_randn(rng, (8, 8), 0.2), compressed=True)
    with no_grad():
        np.testing.assert_array_equal(net.forward(v, y, sched), model2.forward(v, y, sched))


def test_checkpoint_rejects_corruption(tmp_path):
    net = BlockCausalUNet(tiny_diffusion_cfg(), seed=0)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, net)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(bytes(blob))
    with pytest.raises(DataError, match="magic"):
        load_checkpoint(bad)

    blob = bytearray(path.read_bytes())
    # flip a config byte inside the JSON header to break the hash
    idx = blob.find(b'"buffer_len": 4')
    blob[idx + len(b'"buffer_len": ')] = ord("8")
    bad2 = tmp_path / "bad2.ckpt"
    bad2.write_bytes(bytes(blob))
    with pytest.raises(DataError, match="hash"):
        load_checkpoint(bad2)
