"""Shared test harnesses: streaming/offline equivalence and oracle runs."""

import numpy as np

from sestream.engine import PredictiveEngine
from sestream.probe import dependency_matrix
from sestream.spectral import Spectrogram, StftConfig
from sestream.unet import BlockCausalUNet, UNetConfig


def small_stft(freq_bins=16):
    # engines only consume freq_bins / hop_time from the config
    return StftConfig(n_fft=2 * freq_bins - 2, hop=freq_bins - 1)


def norm_free_predictive_cfg(**over):
    base = dict(
        stage_channels=(3, 4, 3),
        time_strides=(2, 2),
        freq_strides=(2, 2),
        time_kernels=(3, 3),
        freq_kernels=(3, 3),
        mode="predictive",
        use_norm=False,
        groups=1,
    )
    base.update(over)
    return UNetConfig(**base)


def past_receptive_extent(net, freq_bins, length):
    """Frames of history an output frame can depend on, measured by probing."""
    dep = dependency_matrix(
        net.forward_array,
        (net.cfg.in_channels, freq_bins, length),
        method="gradient",
        rng=np.random.default_rng(0),
    )
    return max(int(i - np.min(np.where(dep[i])[0])) for i in range(dep.shape[0]))


def streaming_offline_equivalence(net: BlockCausalUNet, freq_bins: int, K: int, d: int, n_frames: int, rng):
    """Stream a signal per frame and compare each emitted frame with the
    offline forward pass over everything received so far, plus the final
    full-sequence pass.  Returns the worst absolute deviation.

    Only steps whose emitted frame has its full receptive field inside real
    data (both in the chunk and in the prefix) are compared; a block-causal
    network is anchored on the newest frame, so chunk and prefix computations
    coincide exactly there.
    """
    r_past = past_receptive_extent(net, freq_bins, K)
    assert K - 1 - d >= r_past, "chunk must cover the emitted frame's receptive field"
    x = rng.standard_normal((freq_bins, n_frames)) + 1j * rng.standard_normal((freq_bins, n_frames))
    engine = PredictiveEngine(net, small_stft(freq_bins), K=K, d=d)
    worst = 0.0
    compared = 0
    emitted_frames = []
    for i in range(n_frames):
        emitted = engine.step(x[:, i])
        emitted_frames.append(emitted)
        if i - d - r_past < 0:
            continue
        prefix = Spectrogram(x[:, : i + 1], compressed=True)
        offline = net.forward_predictive(prefix)[:, i - d]
        worst = max(worst, float(np.max(np.abs(emitted - offline))))
        compared += 1
    assert compared > 0
    # single full-sequence pass: valid at steps whose grid phase matches its
    # anchor (the newest frame), which includes the final step
    g = net.cfg.global_stride
    full = net.forward_predictive(Spectrogram(x, compressed=True))
    for i in range(d + r_past, n_frames):
        if (n_frames - 1 - i) % g == 0:
            worst = max(worst, float(np.max(np.abs(full[:, i - d] - emitted_frames[i]))))
    return worst
