"""Training objectives over the frame-buffer layout.

A training sample mimics stream initialization: the clean/noisy spectrograms
get K-1 leading zero frames, a random K-frame segment is cropped, a random
ascending schedule is drawn, and the last B frames of the clean segment are
perturbed to their scheduled diffusion times.

Losses reduce by the mean over batch, frequency bins, and frames; complex
arrays enter as stacked real/imag planes, so the squared norm equals the
complex modulus squared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError, ShapeError
from .grad import Tensor
from .schedule import ScheduleVector, training_schedule
from .sde import BbedParams, complex_standard_normal, mean_evolution, std


@dataclass
class TrainingBatch:
    """Stacked sample arrays; leading axis is the batch."""

    x0: np.ndarray  # (N, F, K) clean, compressed domain
    y: np.ndarray  # (N, F, K) noisy
    v: np.ndarray  # (N, F, K) perturbed input
    z: np.ndarray  # (N, F, B) injected complex noise
    sigma: np.ndarray  # (N, F, B) per-frame stds, columns constant
    schedules: np.ndarray  # (N, B)
    a: np.ndarray  # (N, F, B) clean target, last B frames of x0


def build_sample(
    clean: np.ndarray,
    noisy: np.ndarray,
    K: int,
    B: int,
    p: BbedParams,
    rng: np.random.Generator,
    offset: int | None = None,
):
    """One training sample from a compressed clean/noisy spectrogram pair."""
    clean = np.asarray(clean, dtype=np.complex128)
    noisy = np.asarray(noisy, dtype=np.complex128)
    if clean.shape != noisy.shape:
        raise ShapeError(f"clean/noisy shapes differ: {clean.shape} vs {noisy.shape}")
    F, n_frames = clean.shape
    if n_frames < 1:
        raise DataError("utterance shorter than one frame")
    if B > K:
        raise DomainError(f"buffer B={B} cannot exceed segment K={K}")
    pad = np.zeros((F, K - 1), dtype=np.complex128)
    clean_p = np.concatenate([pad, clean], axis=1)
    noisy_p = np.concatenate([pad, noisy], axis=1)
    if offset is None:
        offset = int(rng.integers(0, n_frames))
    if not (0 <= offset <= clean_p.shape[1] - K):
        raise DomainError(f"offset {offset} out of range for {n_frames} frames")
    x0 = clean_p[:, offset : offset + K].copy()
    y = noisy_p[:, offset : offset + K].copy()
    sched = training_schedule(B, p, rng)
    sigmas = np.array([std(float(t), p) for t in sched.steps])
    z = complex_standard_normal(rng, (F, B))
    v = x0.copy()
    for j in range(B):
        t = float(sched.steps[j])
        v[:, K - B + j] = mean_evolution(x0[:, K - B + j], y[:, K - B + j], t) + sigmas[j] * z[:, j]
    sigma = np.broadcast_to(sigmas[None, :], (F, B)).copy()
    return x0, y, v, z, sigma, sched.steps, x0[:, K - B :].copy()


def build_batch(
    pairs: list[tuple[np.ndarray, np.ndarray]],
    K: int,
    B: int,
    p: BbedParams,
    rng: np.random.Generator,
    offsets: list[int] | None = None,
) -> TrainingBatch:
    fields = ([], [], [], [], [], [], [])
    for i, (clean, noisy) in enumerate(pairs):
        off = None if offsets is None else offsets[i]
        for acc, val in zip(fields, build_sample(clean, noisy, K, B, p, rng, offset=off)):
            acc.append(val)
    return TrainingBatch(*(np.stack(f) for f in fields))


def _stack_complex(arr: np.ndarray) -> np.ndarray:
    """(N, F, T) complex -> (N, 2, F, T) real/imag planes."""
    return np.stack([arr.real, arr.imag], axis=1)


def _mean_sq(diff: Tensor, denom: int) -> Tensor:
    return (diff * diff).sum().scale(1.0 / denom)


def dsm_loss(net_out: Tensor, z: np.ndarray, sigma: np.ndarray) -> Tensor:
    """Mean squared norm of net_out + z/sigma (elementwise division)."""
    if np.any(sigma <= 0.0):
        raise DomainError("dsm loss requires strictly positive sigma everywhere")
    target = Tensor(_stack_complex(-z / sigma))
    if net_out.data.shape != target.data.shape:
        raise ShapeError(f"net output {net_out.data.shape} vs target {target.data.shape}")
    n, _, f, b = target.data.shape
    return _mean_sq(net_out - target, n * f * b)


def dp_loss(net_out: Tensor, a: np.ndarray) -> Tensor:
    """Mean squared norm of net_out - clean target."""
    target = Tensor(_stack_complex(a))
    if net_out.data.shape != target.data.shape:
        raise ShapeError(f"net output {net_out.data.shape} vs target {target.data.shape}")
    n, _, f, b = target.data.shape
    return _mean_sq(net_out - target, n * f * b)


def mse_loss(net_out: Tensor, clean: np.ndarray) -> Tensor:
    """Predictive objective: mean squared norm against the full clean segment."""
    return dp_loss(net_out, clean)
