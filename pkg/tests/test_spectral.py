import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sestream.errors import DataError, StateError
from sestream.spectral import (
    Spectrogram,
    StftAnalyzer,
    StftConfig,
    StftSynthesizer,
    analyze_stream,
    compress,
    decompress,
    periodic_hann,
    synthesize_stream,
)
from sestream.wavio import read_wav, write_wav


def naive_windowed_dft(segment, window):
    """O(n^2) DFT oracle of a windowed segment, one-sided bins."""
    n = len(segment)
    x = segment * window
    bins = n // 2 + 1
    out = np.empty(bins, dtype=np.complex128)
    for k in range(bins):
        out[k] = np.sum(x * np.exp(-2j * np.pi * k * np.arange(n) / n))
    return out


def test_window_properties():
    cfg = StftConfig()
    w = cfg.window
    assert len(w) == 510
    assert w.min() >= 0.0 and w.max() <= 1.0
    assert w[0] == 0.0
    # periodic window: w[n] = value of the length-(n+1) symmetric window's first n points
    assert np.allclose(w, periodic_hann(510))
    assert cfg.freq_bins == 256


def test_zero_input_gives_zero_spectrogram():
    cfg = StftConfig()
    spec = analyze_stream(np.zeros(256 * 7), cfg)
    assert spec.data.shape == (256, 7)
    assert np.all(spec.data == 0)


def test_frame_count_16000_samples():
    spec = analyze_stream(np.ones(16000) * 0.1, StftConfig())
    assert spec.frames == 63  # ceil(16000 / 256)


def test_sinusoid_matches_direct_dft_oracle():
    cfg = StftConfig()
    n_fft, hop = cfg.n_fft, cfg.hop
    # bin-centered sinusoid: frequency = bin * fs / n_fft
    bin_idx = 40
    n = hop * 24
    t = np.arange(n)
    x = np.sin(2 * np.pi * bin_idx * t / n_fft)
    spec = analyze_stream(x, cfg)
    # pick a frame fully inside the signal: frame k covers samples < (k+1)*hop
    k = 10
    segment = x[(k + 1) * hop - n_fft : (k + 1) * hop]
    oracle = naive_windowed_dft(segment, cfg.window)
    np.testing.assert_allclose(spec.data[:, k], oracle, atol=1e-8)
    mags = np.abs(spec.data[:, k])
    assert np.argmax(mags) == bin_idx
    # energy concentrated at that bin (window leakage stays local)
    far = np.concatenate([mags[: bin_idx - 3], mags[bin_idx + 4 :]])
    assert far.max() < 1e-2 * mags[bin_idx]


def test_roundtrip_random_signal(rng):
    cfg = StftConfig()
    x = rng.standard_normal(256 * 40) * 0.7
    y = synthesize_stream(analyze_stream(x, cfg), cfg)
    assert len(y) == len(x)
    assert np.max(np.abs(y - x)) < 1e-6


def test_zero_spectrogram_synthesizes_to_zero():
    cfg = StftConfig()
    spec = Spectrogram(np.zeros((cfg.freq_bins, 5), dtype=complex))
    assert np.all(synthesize_stream(spec, cfg) == 0)


def test_single_unit_frame_hand_overlap_add():
    cfg = StftConfig()
    data = np.zeros((cfg.freq_bins, 4), dtype=complex)
    grain_spec = np.fft.rfft(np.ones(cfg.n_fft))
    k = 2
    data[:, k] = grain_spec
    out = synthesize_stream(Spectrogram(data), cfg)
    # hand overlap-add: single frame k placed ending at (k+1)*hop,
    # normalized by the summed squared window of every frame position
    w = cfg.window
    acc = np.zeros(4 * cfg.hop)
    norm = np.zeros(4 * cfg.hop)
    for j in range(4):
        start = (j + 1) * cfg.hop - cfg.n_fft
        for i in range(cfg.n_fft):
            pos = start + i
            if 0 <= pos < len(acc):
                norm[pos] += w[i] ** 2
                if j == k:
                    acc[pos] += w[i] * 1.0
    expected = np.where(norm > 1e-12, acc / norm, 0.0)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_truncation_causality():
    # no frame depends on samples later than its hop time
    cfg = StftConfig()
    rng = np.random.default_rng(7)
    x = rng.standard_normal(256 * 12)
    full = analyze_stream(x, cfg)
    for k in (0, 3, 8):
        truncated = analyze_stream(x[: (k + 1) * cfg.hop], cfg)
        np.testing.assert_array_equal(truncated.data[:, : k + 1], full.data[:, : k + 1])


def test_streaming_analyzer_matches_batch(rng):
    cfg = StftConfig()
    x = rng.standard_normal(256 * 9)
    batch = analyze_stream(x, cfg)
    analyzer = StftAnalyzer(cfg)
    for k in range(9):
        frame = analyzer.push_hop(x[k * 256 : (k + 1) * 256])
        np.testing.assert_array_equal(frame, batch.data[:, k])


def test_streaming_synthesizer_matches_batch(rng):
    cfg = StftConfig()
    x = rng.standard_normal(256 * 15) * 0.3
    spec = analyze_stream(x, cfg)
    batch = synthesize_stream(spec, cfg)
    synth = StftSynthesizer(cfg)
    blocks = [synth.push_frame(spec.data[:, k]) for k in range(spec.frames)]
    blocks = [b for b in blocks if b is not None] + [synth.flush()]
    np.testing.assert_array_equal(np.concatenate(blocks), batch)


def test_nonfinite_samples_rejected():
    cfg = StftConfig()
    bad = np.zeros(512)
    bad[100] = np.nan
    with pytest.raises(DataError):
        analyze_stream(bad, cfg)
    with pytest.raises(DataError):
        StftAnalyzer(cfg).push_hop(np.full(256, np.inf))


def test_compress_zero_maps_to_zero():
    cfg = StftConfig()
    spec = Spectrogram(np.zeros((4, 3), dtype=complex))
    assert np.all(compress(spec, cfg).data == 0)


def test_compress_unit_magnitude():
    cfg = StftConfig()
    theta = 0.7
    spec = Spectrogram(np.array([[np.exp(1j * theta)]]))
    out = compress(spec, cfg)
    assert out.compressed
    assert abs(abs(out.data[0, 0]) - 0.5) < 1e-12  # beta * 1**alpha
    assert abs(np.angle(out.data[0, 0]) - theta) < 1e-12


@settings(max_examples=50, deadline=None)
@given(
    re=st.floats(-1e3, 1e3),
    im=st.floats(-1e3, 1e3),
)
def test_compress_roundtrip_and_phase(re, im):
    cfg = StftConfig()
    v = complex(re, im)
    spec = Spectrogram(np.array([[v]]))
    c = compress(spec, cfg)
    if v != 0:
        assert abs(np.angle(c.data[0, 0]) - np.angle(v)) < 1e-12
    back = decompress(c, cfg)
    assert abs(back.data[0, 0] - v) <= 1e-9 * max(abs(v), 1.0)


def test_compress_state_errors(rng):
    cfg = StftConfig()
    spec = Spectrogram(rng.standard_normal((4, 4)) + 0j)
    c = compress(spec, cfg)
    with pytest.raises(StateError):
        compress(c, cfg)
    with pytest.raises(StateError):
        decompress(spec, cfg)
    with pytest.raises(StateError):
        synthesize_stream(c, cfg)


def test_wav_roundtrip(tmp_path, rng):
    path = tmp_path / "x.wav"
    x = np.clip(rng.standard_normal(4000) * 0.2, -0.9, 0.9)
    write_wav(path, x)
    y, rate = read_wav(path)
    assert rate == 16000
    assert len(y) == len(x)
    assert np.max(np.abs(y - x)) < 1.0 / 32768.0


def test_wav_rejects_other_formats(tmp_path):
    import wave

    stereo = tmp_path / "stereo.wav"
    with wave.open(str(stereo), "wb") as wf:
        wf.setnchannels(2)
        wf.setsampwidth(2)
        wf.setframerate(16000)
        wf.writeframes(b"\x00" * 64)
    with pytest.raises(DataError, match="mono"):
        read_wav(stereo)

    eight = tmp_path / "8bit.wav"
    with wave.open(str(eight), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(1)
        wf.setframerate(16000)
        wf.writeframes(b"\x00" * 64)
    with pytest.raises(DataError, match="16-bit"):
        read_wav(eight)

    wrong_rate = tmp_path / "rate.wav"
    with wave.open(str(wrong_rate), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(8000)
        wf.writeframes(b"\x00" * 64)
    with pytest.raises(DataError, match="Hz"):
        read_wav(wrong_rate)

    not_wav = tmp_path / "junk.wav"
    not_wav.write_bytes(b"this is not audio")
    with pytest.raises(DataError):
        read_wav(not_wav)
