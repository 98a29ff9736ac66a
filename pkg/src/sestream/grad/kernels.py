"""Hot convolution kernels: numba-jitted loops with a pure-numpy fallback.

Backend selection: environment variable SESTREAM_BACKEND in {auto, numba,
numpy}; "auto" (default) uses numba when importable.  Both paths compute the
same quantities; numba parallelizes only over independent output slices, so
results are deterministic.

Kernel layout is (A, B, kh, kw) throughout:
  conv2d:           input channels B -> output channels A
  conv_transpose2d: input channels A -> output channels B (exact adjoint)

benchmarks/bench_kernels.py times both backends side by side.
"""

from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_REQUESTED = os.environ.get("SESTREAM_BACKEND", "auto").lower()
if _REQUESTED not in ("auto", "numba", "numpy"):
    raise ValueError(f"SESTREAM_BACKEND must be auto|numba|numpy, got {_REQUESTED!r}")

_HAVE_NUMBA = False
if _REQUESTED in ("auto", "numba"):
    try:
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:
        if _REQUESTED == "numba":
            raise
        _HAVE_NUMBA = False


def backend_name() -> str:
    return "numba" if _HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path


def _np_conv2d_fwd(x, w, sh, sw):
    kh, kw = w.shape[2], w.shape[3]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return np.einsum("nihwkl,oikl->nohw", win, w, optimize=True)


def _np_conv2d_bwd_x(gy, w, sh, sw, H, W):
    n, _, ho, wo = gy.shape
    ci = w.shape[1]
    gx = np.zeros((n, ci, H, W))
    core = _np_convt_fwd(gy, w, sh, sw)
    gx[:, :, : core.shape[2], : core.shape[3]] = core
    return gx


def _np_conv2d_bwd_w(x, gy, w_shape, sh, sw):
    kh, kw = w_shape[2], w_shape[3]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    # residual rows/cols beyond the last window carry no gradient
    win = win[:, :, : gy.shape[2], : gy.shape[3]]
    return np.einsum("nihwkl,nohw->oikl", win, gy, optimize=True)


def _np_convt_fwd(x, w, sh, sw):
    n, a, h, ww = x.shape
    b, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    xs = np.zeros((n, a, (h - 1) * sh + 1, (ww - 1) * sw + 1))
    xs[:, :, ::sh, ::sw] = x
    pad = np.pad(xs, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    win = sliding_window_view(pad, (kh, kw), axis=(2, 3))
    return np.einsum("napqij,abij->nbpq", win, w[:, :, ::-1, ::-1], optimize=True)


def _np_convt_bwd_x(gy, w, sh, sw):
    # gather form: identical contraction to conv2d forward with the same kernel
    kh, kw = w.shape[2], w.shape[3]
    win = sliding_window_view(gy, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return np.einsum("nbhwij,abij->nahw", win, w, optimize=True)


def _np_convt_bwd_w(x, gy, w_shape, sh, sw):
    kh, kw = w_shape[2], w_shape[3]
    win = sliding_window_view(gy, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return np.einsum("nahw,nbhwij->abij", x, win, optimize=True)


# ---------------------------------------------------------------- numba path

if _HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _nb_conv2d_fwd(x, w, sh, sw, y):
        n_batch, ci, _, _ = x.shape
        co, _, kh, kw = w.shape
        ho, wo = y.shape[2], y.shape[3]
        for nc in prange(n_batch * co):
            n = nc // co
            c = nc % co
            for p in range(ho):
                for q in range(wo):
                    acc = 0.0
                    for i in range(ci):
                        for a in range(kh):
                            for b in range(kw):
                                acc += x[n, i, p * sh + a, q * sw + b] * w[c, i, a, b]
                    y[n, c, p, q] = acc

    @njit(cache=True, parallel=True)
    def _nb_conv2d_bwd_x(gy, w, sh, sw, gx):
        n_batch, co, ho, wo = gy.shape
        ci, kh, kw = w.shape[1], w.shape[2], w.shape[3]
        for n in prange(n_batch):
            for c in range(co):
                for p in range(ho):
                    for q in range(wo):
                        g = gy[n, c, p, q]
                        for i in range(ci):
                            for a in range(kh):
                                for b in range(kw):
                                    gx[n, i, p * sh + a, q * sw + b] += g * w[c, i, a, b]

    @njit(cache=True, parallel=True)
    def _nb_conv2d_bwd_w(x, gy, sh, sw, gw):
        n_batch, co, ho, wo = gy.shape
        ci, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
        for c in prange(co):
            for n in range(n_batch):
                for p in range(ho):
                    for q in range(wo):
                        g = gy[n, c, p, q]
                        for i in range(ci):
                            for a in range(kh):
                                for b in range(kw):
                                    gw[c, i, a, b] += x[n, i, p * sh + a, q * sw + b] * g

    @njit(cache=True, parallel=True)
    def _nb_convt_fwd(x, w, sh, sw, y):
        n_batch, ca, h, ww = x.shape
        cb, kh, kw = w.shape[1], w.shape[2], w.shape[3]
        for n in prange(n_batch):
            for a in range(ca):
                for p in range(h):
                    for q in range(ww):
                        v = x[n, a, p, q]
                        for b in range(cb):
                            for i in range(kh):
                                for j in range(kw):
                                    y[n, b, p * sh + i, q * sw + j] += v * w[a, b, i, j]

    @njit(cache=True, parallel=True)
    def _nb_convt_bwd_w(x, gy, sh, sw, gw):
        n_batch, ca, h, ww = x.shape
        cb, kh, kw = gw.shape[1], gw.shape[2], gw.shape[3]
        for a in prange(ca):
            for n in range(n_batch):
                for p in range(h):
                    for q in range(ww):
                        v = x[n, a, p, q]
                        for b in range(cb):
                            for i in range(kh):
                                for j in range(kw):
                                    gw[a, b, i, j] += v * gy[n, b, p * sh + i, q * sw + j]


# ---------------------------------------------------------------- dispatch


def _ascontig(*arrays):
    return tuple(np.ascontiguousarray(a, dtype=np.float64) for a in arrays)


def conv2d_fwd(x, w, sh, sw, backend=None):
    be = backend or backend_name()
    x, w = _ascontig(x, w)
    if be == "numba":
        n, _, H, W = x.shape
        co, _, kh, kw = w.shape
        y = np.empty((n, co, (H - kh) // sh + 1, (W - kw) // sw + 1))
        _nb_conv2d_fwd(x, w, sh, sw, y)
        return y
    return _np_conv2d_fwd(x, w, sh, sw)


def conv2d_bwd_x(gy, w, sh, sw, H, W, backend=None):
    be = backend or backend_name()
    gy, w = _ascontig(gy, w)
    if be == "numba":
        gx = np.zeros((gy.shape[0], w.shape[1], H, W))
        _nb_conv2d_bwd_x(gy, w, sh, sw, gx)
        return gx
    return _np_conv2d_bwd_x(gy, w, sh, sw, H, W)


def conv2d_bwd_w(x, gy, w_shape, sh, sw, backend=None):
    be = backend or backend_name()
    x, gy = _ascontig(x, gy)
    if be == "numba":
        gw = np.zeros(w_shape)
        _nb_conv2d_bwd_w(x, gy, sh, sw, gw)
        return gw
    return _np_conv2d_bwd_w(x, gy, w_shape, sh, sw)


def convt_fwd(x, w, sh, sw, backend=None):
    be = backend or backend_name()
    x, w = _ascontig(x, w)
    if be == "numba":
        n, _, h, ww = x.shape
        _, cb, kh, kw = w.shape
        y = np.zeros((n, cb, (h - 1) * sh + kh, (ww - 1) * sw + kw))
        _nb_convt_fwd(x, w, sh, sw, y)
        return y
    return _np_convt_fwd(x, w, sh, sw)


def convt_bwd_x(gy, w, sh, sw, backend=None):
    be = backend or backend_name()
    gy, w = _ascontig(gy, w)
    if be == "numba":
        n = gy.shape[0]
        ca, _, kh, kw = w.shape
        h = (gy.shape[2] - kh) // sh + 1
        ww = (gy.shape[3] - kw) // sw + 1
        gx = np.empty((n, ca, h, ww))
        # same contraction as conv2d forward with the same (A, B, kh, kw) kernel
        _nb_conv2d_fwd(gy, w, sh, sw, gx)
        return gx
    return _np_convt_bwd_x(gy, w, sh, sw)


def convt_bwd_w(x, gy, w_shape, sh, sw, backend=None):
    be = backend or backend_name()
    x, gy = _ascontig(x, gy)
    if be == "numba":
        gw = np.zeros(w_shape)
        _nb_convt_bwd_w(x, gy, sh, sw, gw)
        return gw
    return _np_convt_bwd_w(x, gy, w_shape, sh, sw)
