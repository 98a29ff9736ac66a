"""Block-causal convolutional UNet for streaming spectrogram enhancement.

Three rules make the time axis block-causal with block size equal to the
global stride g (the product of all time strides):

  1. downsampling inputs are never zero-padded on the right;
  2. they are left-padded with exactly ceil(n/s)*s - n + (k - s) zeros, so
     every window fits and the last window ends on the newest frame;
  3. upsampling outputs are cropped from the left by ceil(n/s)*s - n, which
     re-anchors the stride grid on the newest frame.

With these rules output token i of a block (i = 1..g) looks ahead exactly
g - i frames.  The "symmetric" padding variant keeps the same shapes but
splits padding/cropping evenly on both sides; it intentionally violates
causality and exists as a probe control.

The frequency axis always uses symmetric padding: causality is a time-axis
property only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, DomainError, ShapeError, StateError
from .grad import (
    ParamStore,
    Tensor,
    concat_channels,
    conv2d,
    conv_transpose2d,
    conv_init,
    crop4,
    cumulative_group_norm,
    grad_enabled,
    pad4,
    silu,
)
from .schedule import ScheduleVector
from .spectral import Spectrogram


def left_pad_amount(n: int, k: int, s: int) -> int:
    """Zeros added on the left of a downsampling input of length n."""
    if k < s:
        raise ConfigError(f"kernel ({k}) must cover the stride ({s})")
    if s < 1 or n < 1:
        raise DomainError(f"need n >= 1 and s >= 1, got n={n}, s={s}")
    return int(math.ceil(n / s)) * s - n + (k - s)


def _up_crop_amount(target_len: int, s: int) -> int:
    """Left crop that re-anchors the transposed-conv grid on the newest frame."""
    return int(math.ceil(target_len / s)) * s - target_len


def _sym_split(total: int) -> tuple[int, int]:
    return total // 2, total - total // 2


def bc_downsample(
    x: Tensor,
    w: Tensor,
    stride: tuple[int, int],
    symmetric_time: bool = False,
) -> Tensor:
    """Strided downsampling conv; left-only time padding unless symmetric."""
    sf, st = stride
    _, _, kf, kt = w.data.shape
    n_f, n_t = x.data.shape[2], x.data.shape[3]
    p_t = left_pad_amount(n_t, kt, st)
    p_f = left_pad_amount(n_f, kf, sf)
    time_pad = _sym_split(p_t) if symmetric_time else (p_t, 0)
    padded = pad4(x, _sym_split(p_f), time_pad)
    return conv2d(padded, w, (sf, st))


def bc_upsample(
    x: Tensor,
    w: Tensor,
    stride: tuple[int, int],
    target_freq: int,
    target_len: int,
    symmetric_time: bool = False,
) -> Tensor:
    """Transposed conv cropped back to the matching downsample input size."""
    sf, st = stride
    raw = conv_transpose2d(x, w, (sf, st))
    raw_f, raw_t = raw.data.shape[2], raw.data.shape[3]
    if symmetric_time:
        c_t = (raw_t - target_len) // 2
    else:
        c_t = _up_crop_amount(target_len, st)
    c_f = (raw_f - target_freq) // 2
    if c_t < 0 or c_t + target_len > raw_t:
        raise ShapeError(
            f"upsample produced {raw_t} frames, cannot crop {c_t} to target {target_len}"
        )
    if c_f < 0 or c_f + target_freq > raw_f:
        raise ShapeError(
            f"upsample produced {raw_f} bins, cannot crop {c_f} to target {target_freq}"
        )
    return crop4(raw, slice(c_f, c_f + target_freq), slice(c_t, c_t + target_len))


def fourier_features(steps: np.ndarray, dim: int) -> np.ndarray:
    """(dim x B) sin/cos features of the time-step vector, log-spaced rates."""
    half = dim // 2
    rates = np.geomspace(1.0, 1000.0, half)
    arg = 2.0 * np.pi * rates[:, None] * np.asarray(steps)[None, :]
    feats = np.empty((2 * half, len(steps)))
    feats[0::2] = np.sin(arg)
    feats[1::2] = np.cos(arg)
    return feats


@dataclass(frozen=True)
class UNetConfig:
    stage_channels: tuple = (8, 16, 16, 16, 8)
    time_strides: tuple = (2, 2, 2, 2)
    freq_strides: tuple = (2, 2, 2, 2)
    time_kernels: tuple = (3, 3, 3, 3)
    freq_kernels: tuple = (3, 3, 3, 3)
    fourier_dim: int = 64
    mode: str = "diffusion"
    buffer_len: int = 16
    padding: str = "block-causal"
    groups: int = 8
    norm_eps: float = 1e-6
    use_norm: bool = True

    def __post_init__(self):
        for name in ("stage_channels", "time_strides", "freq_strides", "time_kernels", "freq_kernels"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        n_stages = len(self.time_strides)
        if len(self.stage_channels) != n_stages + 1:
            raise ConfigError("stage_channels must have one more entry than the stride lists")
        for lst in (self.freq_strides, self.time_kernels, self.freq_kernels):
            if len(lst) != n_stages:
                raise ConfigError("stride/kernel lists must all have the same length")
        for k, s in zip(self.time_kernels, self.time_strides):
            if k < s:
                raise ConfigError(f"time kernel {k} must cover stride {s}")
        for k, s in zip(self.freq_kernels, self.freq_strides):
            if k < s:
                raise ConfigError(f"freq kernel {k} must cover stride {s}")
        if self.mode not in ("diffusion", "predictive"):
            raise ConfigError(f"mode must be diffusion|predictive, got {self.mode!r}")
        if self.padding not in ("block-causal", "symmetric"):
            raise ConfigError(f"padding must be block-causal|symmetric, got {self.padding!r}")
        if self.fourier_dim < 2 or self.fourier_dim % 2:
            raise ConfigError("fourier_dim must be an even number >= 2")
        if self.mode == "diffusion":
            if self.buffer_len < 2:
                raise ConfigError("diffusion mode needs buffer_len >= 2")
            if self.global_stride != self.buffer_len:
                raise ConfigError(
                    f"diffusion mode requires global stride == buffer_len, "
                    f"got g={self.global_stride}, B={self.buffer_len}"
                )

    @property
    def n_stages(self) -> int:
        return len(self.time_strides)

    @property
    def global_stride(self) -> int:
        out = 1
        for s in self.time_strides:
            out *= s
        return out

    @property
    def in_channels(self) -> int:
        return 4 if self.mode == "diffusion" else 2

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "UNetConfig":
        return UNetConfig(**d)


def _norm_groups(requested: int, channels: int) -> int:
    g = min(requested, channels)
    while channels % g:
        g -= 1
    return g


class BlockCausalUNet:
    """UNet with block-causal strided down/up stages and per-step time embeddings.

    Diffusion mode stacks real/imag parts of the perturbed input and the noisy
    chunk into 4 input channels and returns the estimate for the last
    buffer_len frames; predictive mode maps the noisy chunk alone, length in =
    length out.
    """

    def __init__(self, cfg: UNetConfig, seed: int = 0):
        self.cfg = cfg
        self.params = ParamStore()
        self._temb_cache: dict[bytes, list[np.ndarray]] = {}
        rng = np.random.default_rng(seed)
        ch = cfg.stage_channels
        L = cfg.n_stages
        self._cum_t = [1]
        for s in cfg.time_strides:
            self._cum_t.append(self._cum_t[-1] * s)

        def add_conv(name, co, ci, kf, kt):
            self.params.add(f"{name}_w", conv_init(rng, (co, ci, kf, kt), ci * kf * kt))
            self.params.add(f"{name}_b", np.zeros(co))

        add_conv("lift", ch[0], cfg.in_channels, 1, 1)
        for l in range(L):
            kf, kt = cfg.freq_kernels[l], cfg.time_kernels[l]
            add_conv(f"down{l}", ch[l + 1], ch[l], kf, kt)
            if cfg.use_norm:
                self.params.add(f"down{l}_gamma", np.ones(ch[l + 1]))
                self.params.add(f"down{l}_beta", np.zeros(ch[l + 1]))
            # transposed kernels use the (in, out, kf, kt) adjoint layout
            self.params.add(
                f"up{l}_w", conv_init(rng, (ch[l + 1], ch[l], kf, kt), ch[l + 1] * kf * kt)
            )
            self.params.add(f"up{l}_b", np.zeros(ch[l]))
            add_conv(f"merge{l}", ch[l], 2 * ch[l], 1, 1)
            if cfg.use_norm:
                self.params.add(f"up{l}_gamma", np.ones(ch[l]))
                self.params.add(f"up{l}_beta", np.zeros(ch[l]))
            if cfg.mode == "diffusion":
                add_conv(f"temb_down{l}", ch[l + 1], cfg.fourier_dim, 1, self._cum_t[l + 1])
                add_conv(f"temb_up{l}", ch[l], cfg.fourier_dim, 1, self._cum_t[l])
        add_conv("head", 2, ch[0], 1, 1)

    # -- time embeddings -----------------------------------------------------

    def invalidate_cache(self):
        self._temb_cache.clear()

    def _project_temb(self, feats: np.ndarray) -> list[Tensor]:
        """Per-stage projections of (N x M x B) features; order: down0..L-1, up0..L-1."""
        e = Tensor(feats[:, :, None, :])  # (N, M, 1, B)
        out = []
        for l in range(self.cfg.n_stages):
            w, b = self.params[f"temb_down{l}_w"], self.params[f"temb_down{l}_b"]
            cum = self._cum_t[l + 1]
            out.append(conv2d(e, w, (1, cum)) + _bias4(b))
        for l in range(self.cfg.n_stages):
            w, b = self.params[f"temb_up{l}_w"], self.params[f"temb_up{l}_b"]
            cum = self._cum_t[l]
            out.append(conv2d(e, w, (1, cum)) + _bias4(b))
        return out

    def _temb(self, schedule: ScheduleVector) -> list:
        feats = fourier_features(schedule.steps, self.cfg.fourier_dim)[None]
        if grad_enabled():
            return self._project_temb(feats)
        key = schedule.steps.tobytes()
        if key not in self._temb_cache:
            self._temb_cache[key] = [t.data for t in self._project_temb(feats)]
        return [Tensor(a) for a in self._temb_cache[key]]

    def _add_temb(self, h: Tensor, emb: Tensor) -> Tensor:
        """Add the projected embedding to the newest frames (the buffer tail)."""
        t_len = h.data.shape[3]
        b_len = emb.data.shape[3]
        if t_len < b_len:
            raise ShapeError(f"sequence of {t_len} frames shorter than embedded buffer {b_len}")
        return h + pad4(emb, (0, 0), (t_len - b_len, 0))

    # -- forward passes --------------------------------------------------------

    def forward_array(self, x: Tensor | np.ndarray, temb: list | None = None) -> Tensor:
        cfg = self.cfg
        if not isinstance(x, Tensor):
            x = Tensor(x)
        if x.ndim != 4 or x.data.shape[1] != cfg.in_channels:
            raise ShapeError(f"expected (N, {cfg.in_channels}, F, T) input, got {x.data.shape}")
        sym = cfg.padding == "symmetric"
        L = cfg.n_stages
        h = conv2d(x, self.params["lift_w"], (1, 1)) + _bias4(self.params["lift_b"])
        skips: list[Tensor] = []
        for l in range(L):
            skips.append(h)
            stride = (cfg.freq_strides[l], cfg.time_strides[l])
            h = bc_downsample(h, self.params[f"down{l}_w"], stride, symmetric_time=sym)
            h = h + _bias4(self.params[f"down{l}_b"])
            if cfg.use_norm:
                h = cumulative_group_norm(
                    h,
                    self.params[f"down{l}_gamma"],
                    self.params[f"down{l}_beta"],
                    _norm_groups(cfg.groups, h.data.shape[1]),
                    cfg.norm_eps,
                )
            if temb is not None:
                h = self._add_temb(h, temb[l])
            h = silu(h)
        for l in reversed(range(L)):
            skip = skips[l]
            stride = (cfg.freq_strides[l], cfg.time_strides[l])
            h = bc_upsample(
                h,
                self.params[f"up{l}_w"],
                stride,
                skip.data.shape[2],
                skip.data.shape[3],
                symmetric_time=sym,
            )
            h = h + _bias4(self.params[f"up{l}_b"])
            h = concat_channels(h, skip)
            h = conv2d(h, self.params[f"merge{l}_w"], (1, 1)) + _bias4(self.params[f"merge{l}_b"])
            if cfg.use_norm:
                h = cumulative_group_norm(
                    h,
                    self.params[f"up{l}_gamma"],
                    self.params[f"up{l}_beta"],
                    _norm_groups(cfg.groups, h.data.shape[1]),
                    cfg.norm_eps,
                )
            if temb is not None:
                h = self._add_temb(h, temb[L + l])
            h = silu(h)
        return conv2d(h, self.params["head_w"], (1, 1)) + _bias4(self.params["head_b"])

    def forward(self, v: Spectrogram, y: Spectrogram, schedule: ScheduleVector) -> np.ndarray:
        """Diffusion-mode estimate for the last buffer_len frames, complex F x B."""
        cfg = self.cfg
        if cfg.mode != "diffusion":
            raise StateError("forward() needs a diffusion-mode network")
        if not (v.compressed and y.compressed):
            raise StateError("network inputs must be compressed spectrograms")
        if v.data.shape != y.data.shape:
            raise ShapeError(f"input shapes differ: {v.data.shape} vs {y.data.shape}")
        K = v.frames
        B = cfg.buffer_len
        if K < B:
            raise DomainError(f"chunk of {K} frames shorter than buffer {B}")
        if len(schedule) != B:
            raise DomainError(f"schedule length {len(schedule)} != buffer_len {B}")
        x = np.stack([v.data.real, v.data.imag, y.data.real, y.data.imag])[None]
        out = self.forward_array(Tensor(x), temb=self._temb(schedule))
        tail = out.data[0, :, :, K - B :]
        return tail[0] + 1j * tail[1]

    def forward_tensor(self, v: Spectrogram, y: Spectrogram, schedule: ScheduleVector) -> Tensor:
        """Training-path forward: real/imag stacked tensor (1, 2, F, B)."""
        cfg = self.cfg
        K = v.frames
        B = cfg.buffer_len
        if K < B:
            raise DomainError(f"chunk of {K} frames shorter than buffer {B}")
        if len(schedule) != B:
            raise DomainError(f"schedule length {len(schedule)} != buffer_len {B}")
        x = np.stack([v.data.real, v.data.imag, y.data.real, y.data.imag])[None]
        out = self.forward_array(Tensor(x), temb=self._temb(schedule))
        return crop4(out, slice(None), slice(K - B, K))

    def forward_predictive(self, y: Spectrogram) -> np.ndarray:
        """Predictive-mode denoised estimate, complex F x K."""
        if self.cfg.mode != "predictive":
            raise StateError("forward_predictive() needs a predictive-mode network")
        if y.frames == 0:
            return np.zeros_like(y.data)
        x = np.stack([y.data.real, y.data.imag])[None]
        out = self.forward_array(Tensor(x)).data
        return out[0, 0] + 1j * out[0, 1]

    def forward_batch(self, v: np.ndarray, y: np.ndarray, schedules: np.ndarray) -> Tensor:
        """Batched training forward: (N, F, K) complex pairs -> Tensor (N, 2, F, B)."""
        cfg = self.cfg
        if cfg.mode != "diffusion":
            raise StateError("forward_batch() needs a diffusion-mode network")
        v = np.asarray(v)
        y = np.asarray(y)
        schedules = np.asarray(schedules, dtype=np.float64)
        n, _, K = v.shape
        B = cfg.buffer_len
        if K < B:
            raise DomainError(f"chunk of {K} frames shorter than buffer {B}")
        if schedules.shape != (n, B):
            raise DomainError(f"schedules must be ({n}, {B}), got {schedules.shape}")
        x = np.stack([v.real, v.imag, y.real, y.imag], axis=1)
        feats = np.stack([fourier_features(s, cfg.fourier_dim) for s in schedules])
        out = self.forward_array(Tensor(x), temb=self._project_temb(feats))
        return crop4(out, slice(None), slice(K - B, K))

    def forward_batch_predictive(self, y: np.ndarray) -> Tensor:
        """Batched predictive forward: (N, F, K) complex -> Tensor (N, 2, F, K)."""
        if self.cfg.mode != "predictive":
            raise StateError("forward_batch_predictive() needs a predictive-mode network")
        y = np.asarray(y)
        x = np.stack([y.real, y.imag], axis=1)
        return self.forward_array(Tensor(x))


def _bias4(b: Tensor) -> Tensor:
    """View a per-channel bias vector as a broadcastable (1, C, 1, 1) tensor."""

    def bwd(g):
        b._accumulate(g.reshape(b.data.size))

    out_data = b.data[None, :, None, None]
    return Tensor._result(out_data, (b,), bwd)
