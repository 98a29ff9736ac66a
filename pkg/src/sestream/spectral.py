"""Streaming STFT analysis/synthesis and magnitude compression.

Analysis emits one frame per hop: after every ``hop`` new samples the most
recent ``n_fft`` samples are windowed (periodic Hann) and transformed with a
one-sided real FFT.  The rolling sample window starts zero-filled, so the
first frames describe the zero history before the stream began.

Synthesis is weighted overlap-add with least-squares normalization (divide by
the summed squared analysis windows), which reconstructs exactly for any
window/hop ratio -- n_fft=510 with hop 256 does not satisfy constant
overlap-add for a plain Hann.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, StateError


def periodic_hann(n: int) -> np.ndarray:
    """Hann window of length n without the repeated endpoint."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class StftConfig:
    n_fft: int = 510
    hop: int = 256
    sample_rate: int = 16000
    beta: float = 0.5
    alpha: float = 0.15

    def __post_init__(self):
        if not (self.n_fft > self.hop > 0):
            raise ConfigError(f"need n_fft > hop > 0, got n_fft={self.n_fft} hop={self.hop}")
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")

    @property
    def freq_bins(self) -> int:
        """One-sided spectrum size (256 for n_fft=510)."""
        return self.n_fft // 2 + 1

    @property
    def window(self) -> np.ndarray:
        return periodic_hann(self.n_fft)

    @property
    def hop_time(self) -> float:
        """Duration of one frame hop in seconds."""
        return self.hop / self.sample_rate


@dataclass
class Spectrogram:
    """Complex STFT matrix, freq_bins x frames, plus compression state."""

    data: np.ndarray
    compressed: bool = False

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2:
            raise DataError(f"spectrogram must be 2-D, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise DataError("spectrogram contains non-finite entries")

    @property
    def frames(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "Spectrogram":
        return Spectrogram(self.data.copy(), self.compressed)


class StftAnalyzer:
    """Incremental analyzer: one hop of samples in, one frame out."""

    def __init__(self, cfg: StftConfig):
        self.cfg = cfg
        self._window = cfg.window
        self._buf = np.zeros(cfg.n_fft)

    def push_hop(self, samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape != (self.cfg.hop,):
            raise DataError(f"expected exactly one hop of {self.cfg.hop} samples, got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise DataError("non-finite samples rejected")
        self._buf = np.concatenate([self._buf[self.cfg.hop:], samples])
        return np.fft.rfft(self._buf * self._window)


def analyze_stream(samples, cfg: StftConfig) -> Spectrogram:
    """STFT of a full signal via the streaming analyzer.

    The tail is zero-padded to a whole hop, so the frame count equals the
    number of hops consumed: ceil(len(samples) / hop).
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise DataError("expected a 1-D sample sequence")
    if not np.all(np.isfinite(samples)):
        raise DataError("non-finite samples rejected")
    hop = cfg.hop
    n_frames = int(np.ceil(len(samples) / hop))
    padded = np.zeros(n_frames * hop)
    padded[: len(samples)] = samples
    analyzer = StftAnalyzer(cfg)
    out = np.empty((cfg.freq_bins, n_frames), dtype=np.complex128)
    for k in range(n_frames):
        out[:, k] = analyzer.push_hop(padded[k * hop : (k + 1) * hop])
    return Spectrogram(out, compressed=False)


def synthesize_stream(spec: Spectrogram, cfg: StftConfig) -> np.ndarray:
    """Weighted overlap-add inverse of analyze_stream.

    Frame k is placed so that it ends at sample (k+1)*hop, mirroring the
    analysis timing; samples before t=0 belong to the zero history and are
    discarded.  Output length is frames * hop.
    """
    if spec.compressed:
        raise StateError("cannot synthesize a compressed spectrogram; decompress first")
    n_fft, hop = cfg.n_fft, cfg.hop
    window = cfg.window
    n_frames = spec.frames
    total = n_frames * hop
    acc = np.zeros(total)
    norm = np.zeros(total)
    wsq = window * window
    for k in range(n_frames):
        grain = np.fft.irfft(spec.data[:, k], n=n_fft) * window
        start = (k + 1) * hop - n_fft
        lo = max(start, 0)
        hi = min(start + n_fft, total)
        if hi <= lo:
            continue
        acc[lo:hi] += grain[lo - start : hi - start]
        norm[lo:hi] += wsq[lo - start : hi - start]
    out = np.zeros(total)
    nz = norm > 1e-12
    out[nz] = acc[nz] / norm[nz]
    return out


class StftSynthesizer:
    """Incremental weighted overlap-add: one frame in, one finished hop out.

    The hop emitted alongside frame k is [(k-1)*hop, k*hop); those samples can
    no longer receive contributions from later frames.  flush() returns the
    final hop.
    """

    def __init__(self, cfg: StftConfig):
        self.cfg = cfg
        self._window = cfg.window
        self._wsq = self._window * self._window
        span = cfg.n_fft + cfg.hop
        self._acc = np.zeros(span)
        self._norm = np.zeros(span)
        self._frames = 0

    def _emit(self, start: int) -> np.ndarray:
        hop = self.cfg.hop
        block = np.zeros(hop)
        acc = self._acc[start : start + hop]
        norm = self._norm[start : start + hop]
        nz = norm > 1e-12
        block[nz] = acc[nz] / norm[nz]
        return block

    def push_frame(self, frame: np.ndarray) -> np.ndarray | None:
        """Add one spectral frame; returns the previous hop once it is final."""
        n_fft, hop = self.cfg.n_fft, self.cfg.hop
        if self._frames > 0:
            self._acc[:-hop] = self._acc[hop:]
            self._acc[-hop:] = 0.0
            self._norm[:-hop] = self._norm[hop:]
            self._norm[-hop:] = 0.0
        grain = np.fft.irfft(np.asarray(frame, dtype=np.complex128), n=n_fft) * self._window
        self._acc[hop:] += grain
        self._norm[hop:] += self._wsq
        self._frames += 1
        if self._frames < 2:
            return None
        return self._emit(n_fft - hop)

    def flush(self) -> np.ndarray | None:
        if self._frames == 0:
            return None
        return self._emit(self.cfg.n_fft)


def compress(spec: Spectrogram, cfg: StftConfig) -> Spectrogram:
    """Magnitude compression v -> beta * |v|**alpha * exp(i*angle(v)); 0 maps to 0."""
    if spec.compressed:
        raise StateError("spectrogram is already compressed")
    mag = np.abs(spec.data)
    out = np.zeros_like(spec.data)
    nz = mag > 0
    out[nz] = cfg.beta * mag[nz] ** cfg.alpha * (spec.data[nz] / mag[nz])
    return Spectrogram(out, compressed=True)


def decompress(spec: Spectrogram, cfg: StftConfig) -> Spectrogram:
    """Exact inverse of compress: v -> (|v|/beta)**(1/alpha) * exp(i*angle(v))."""
    if not spec.compressed:
        raise StateError("spectrogram is not compressed")
    mag = np.abs(spec.data)
    out = np.zeros_like(spec.data)
    nz = mag > 0
    out[nz] = (mag[nz] / cfg.beta) ** (1.0 / cfg.alpha) * (spec.data[nz] / mag[nz])
    return Spectrogram(out, compressed=False)
