"""Scale-invariant SDR and SIR.

Streaming output lags the input by the emitted-frame delay, so callers shift
the reference with delay_signal before scoring.  Ratios are clipped to
+/- 100 dB to keep exact matches and zero-target cases finite.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

DB_CAP = 100.0


def _as_pair(estimate, reference):
    est = np.asarray(estimate, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if est.shape != ref.shape or est.ndim != 1 or est.size < 1:
        raise DomainError(f"need equal-length 1-D signals, got {est.shape} vs {ref.shape}")
    return est, ref


def _ratio_db(num: float, den: float) -> float:
    if den <= 0.0:
        return DB_CAP
    if num <= 0.0:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


def si_sdr(estimate, reference) -> float:
    """10*log10(||a s||^2 / ||a s - s_hat||^2), a = <s_hat, s>/||s||^2."""
    est, ref = _as_pair(estimate, reference)
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise DomainError("reference signal is all zeros")
    alpha = float(est @ ref) / ref_energy
    target = alpha * ref
    err = target - est
    return _ratio_db(float(target @ target), float(err @ err))


def si_sir(estimate, reference, interference) -> float:
    """Target-projection energy over interference-subspace projection energy."""
    est, ref = _as_pair(estimate, reference)
    _, intf = _as_pair(estimate, interference)
    basis = np.stack([ref, intf], axis=1)
    gram = basis.T @ basis
    if np.linalg.matrix_rank(gram) < 2:
        raise DomainError("reference and interference are linearly dependent")
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise DomainError("reference signal is all zeros")
    s_target = (float(est @ ref) / ref_energy) * ref
    coeffs = np.linalg.solve(gram, basis.T @ est)
    e_interf = basis @ coeffs - s_target
    return _ratio_db(float(s_target @ s_target), float(e_interf @ e_interf))


def delay_signal(reference, delay_samples: int) -> np.ndarray:
    """Shift the reference right by the engine's emitted-frame delay."""
    ref = np.asarray(reference, dtype=np.float64)
    if delay_samples < 0:
        raise DomainError("delay must be nonnegative")
    if delay_samples == 0:
        return ref.copy()
    out = np.zeros_like(ref)
    out[delay_samples:] = ref[: len(ref) - delay_samples]
    return out
