"""Differentiable array operations for the convolutional network.

Convolutions take explicit per-side padding at the call site (pad4) and never
pad internally, so causality decisions stay auditable where the network is
assembled.  Shapes are (batch, channels, freq, time) throughout.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import kernels
from .tensor import Tensor


def pad4(x: Tensor, freq_pad: tuple[int, int], time_pad: tuple[int, int]) -> Tensor:
    """Zero padding on the freq/time axes, explicit per side."""
    fl, fr = freq_pad
    tl, tr = time_pad
    if min(fl, fr, tl, tr) < 0:
        raise ShapeError("padding counts must be nonnegative")
    if fl == fr == tl == tr == 0:
        return x
    out_data = np.pad(x.data, ((0, 0), (0, 0), (fl, fr), (tl, tr)))

    def bwd(g):
        n, c, F, T = x.data.shape
        x._accumulate(g[:, :, fl : fl + F, tl : tl + T])

    return Tensor._result(out_data, (x,), bwd)


def crop4(x: Tensor, freq_slice: slice, time_slice: slice) -> Tensor:
    """Slice the freq/time axes; gradient scatters back into place."""
    out_data = x.data[:, :, freq_slice, time_slice]

    def bwd(g):
        gx = np.zeros_like(x.data)
        gx[:, :, freq_slice, time_slice] = g
        x._accumulate(gx)

    return Tensor._result(out_data, (x,), bwd)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[0] != b.data.shape[0] or a.data.shape[2:] != b.data.shape[2:]:
        raise ShapeError(f"concat shape mismatch: {a.data.shape} vs {b.data.shape}")
    ca = a.data.shape[1]
    out_data = np.concatenate([a.data, b.data], axis=1)

    def bwd(g):
        a._accumulate(g[:, :ca])
        b._accumulate(g[:, ca:])

    return Tensor._result(out_data, (a, b), bwd)


def conv2d(x: Tensor, w: Tensor, stride: tuple[int, int]) -> Tensor:
    """Valid cross-correlation over an explicitly padded input.

    x: (N, Ci, F, T); w: (Co, Ci, kf, kt); output per axis (n - k)//s + 1.
    """
    sf, st = stride
    n, ci, F, T = x.data.shape
    co, ci_w, kf, kt = w.data.shape
    if ci != ci_w:
        raise ShapeError(f"conv2d channel mismatch: input {ci}, kernel {ci_w}")
    if kf > F or kt > T:
        raise ShapeError(f"kernel ({kf},{kt}) exceeds input ({F},{T})")
    out_data = kernels.conv2d_fwd(x.data, w.data, sf, st)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(kernels.conv2d_bwd_x(g, w.data, sf, st, F, T))
        if w.requires_grad:
            w._accumulate(kernels.conv2d_bwd_w(x.data, g, w.data.shape, sf, st))

    return Tensor._result(out_data, (x, w), bwd)


def conv_transpose2d(x: Tensor, w: Tensor, stride: tuple[int, int]) -> Tensor:
    """Exact adjoint of conv2d with the same kernel layout.

    x: (N, A, F, T); w: (A, B, kf, kt); output (N, B, (F-1)*sf+kf, (T-1)*st+kt).
    """
    sf, st = stride
    _, ca, _, _ = x.data.shape
    ca_w = w.data.shape[0]
    if ca != ca_w:
        raise ShapeError(f"conv_transpose2d channel mismatch: input {ca}, kernel {ca_w}")
    out_data = kernels.convt_fwd(x.data, w.data, sf, st)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(kernels.convt_bwd_x(g, w.data, sf, st))
        if w.requires_grad:
            w._accumulate(kernels.convt_bwd_w(x.data, g, w.data.shape, sf, st))

    return Tensor._result(out_data, (x, w), bwd)


def silu(x: Tensor) -> Tensor:
    """Sigmoid-weighted linear unit: x * sigmoid(x)."""
    sig = 1.0 / (1.0 + np.exp(-x.data))
    out_data = x.data * sig

    def bwd(g):
        x._accumulate(g * (sig * (1.0 + x.data * (1.0 - sig))))

    return Tensor._result(out_data, (x,), bwd)


def cumulative_group_norm(
    x: Tensor, gamma: Tensor, beta: Tensor, groups: int, eps: float = 1e-6
) -> Tensor:
    """GroupNorm with running statistics over time.

    The output at time index tau is normalized by the mean/variance
    accumulated over all channels in the group, all freq bins, and all time
    indices <= tau, then scaled/shifted per channel.  Strictly causal along
    the time axis by construction.
    """
    n, c, F, T = x.data.shape
    if c % groups:
        raise ShapeError(f"channels {c} not divisible by groups {groups}")
    if gamma.data.shape != (c,) or beta.data.shape != (c,):
        raise ShapeError("gamma/beta must be per-channel vectors")
    cg = c // groups
    xg = x.data.reshape(n, groups, cg, F, T)
    counts = cg * F * np.arange(1, T + 1, dtype=np.float64)  # (T,)
    s1 = np.cumsum(xg.sum(axis=(2, 3)), axis=-1)  # (n, groups, T)
    s2 = np.cumsum((xg * xg).sum(axis=(2, 3)), axis=-1)
    mean = s1 / counts
    var = np.maximum(s2 / counts - mean * mean, 0.0)
    inv = 1.0 / np.sqrt(var + eps)  # (n, groups, T)
    xhat = (xg - mean[:, :, None, None, :]) * inv[:, :, None, None, :]
    xhat_flat = xhat.reshape(n, c, F, T)
    out_data = xhat_flat * gamma.data[None, :, None, None] + beta.data[None, :, None, None]

    def bwd(g):
        ghat = (g * gamma.data[None, :, None, None]).reshape(n, groups, cg, F, T)
        sg = ghat.sum(axis=(2, 3))  # (n, groups, T)
        sxg = (ghat * xg).sum(axis=(2, 3)) - mean * sg
        a_term = inv * sg / counts
        b_term = inv**3 * sxg / counts
        c_term = b_term * mean
        suff_a = np.cumsum(a_term[..., ::-1], axis=-1)[..., ::-1]
        suff_b = np.cumsum(b_term[..., ::-1], axis=-1)[..., ::-1]
        suff_c = np.cumsum(c_term[..., ::-1], axis=-1)[..., ::-1]
        gx = (
            ghat * inv[:, :, None, None, :]
            - suff_a[:, :, None, None, :]
            - xg * suff_b[:, :, None, None, :]
            + suff_c[:, :, None, None, :]
        )
        x._accumulate(gx.reshape(n, c, F, T))
        if gamma.requires_grad:
            gamma._accumulate((g * xhat_flat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=(0, 2, 3)))

    return Tensor._result(out_data, (x, gamma, beta), bwd)
