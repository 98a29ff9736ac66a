"""Synthetic paired-clip generation and manifest handling.

Clean clips are sums of 2-5 harmonic tones with amplitude envelopes; noise is
a white/pink mixture scaled to an exact target SNR drawn uniformly from
[-5, 10] dB.  Pairs are sample-aligned by construction.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import DataError
from .wavio import write_wav


def _envelope(n: int, rng: np.random.Generator) -> np.ndarray:
    attack = int(rng.uniform(0.05, 0.3) * n)
    release = int(rng.uniform(0.05, 0.3) * n)
    env = np.ones(n)
    env[:attack] = np.linspace(0.0, 1.0, attack, endpoint=False)
    env[n - release :] = np.linspace(1.0, 0.0, release)
    wobble = 1.0 + 0.3 * np.sin(2.0 * np.pi * rng.uniform(0.5, 3.0) * np.arange(n) / n)
    return env * wobble


def make_clean(n: int, rate: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / rate
    sig = np.zeros(n)
    for _ in range(int(rng.integers(2, 6))):
        f0 = rng.uniform(90.0, 500.0)
        amp = rng.uniform(0.3, 1.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        tone = np.zeros(n)
        for h in range(1, int(rng.integers(1, 5)) + 1):
            tone += (amp / h) * np.sin(2.0 * np.pi * f0 * h * t + phase * h)
        sig += _envelope(n, rng) * tone
    peak = np.max(np.abs(sig))
    return sig * (0.3 / peak) if peak > 0 else sig


def make_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n)
    freqs[0] = freqs[1]
    pink = np.fft.irfft(spectrum / np.sqrt(freqs), n=n)
    pink /= np.std(pink)
    w = rng.uniform(0.0, 1.0)
    mix = w * white + (1.0 - w) * pink
    return mix / np.std(mix)


def mix_at_snr(clean: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    p_clean = float(np.mean(clean**2))
    p_noise = float(np.mean(noise**2))
    scale = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return clean + scale * noise


def synth_dataset(
    n_pairs: int,
    out_dir,
    rng: np.random.Generator,
    duration: float = 2.0,
    rate: int = 16000,
) -> Path:
    """Write n_pairs of (clean, noisy) WAVs plus a manifest CSV; returns its path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n = int(duration * rate)
    rows = []
    for i in range(n_pairs):
        clean = make_clean(n, rate, rng)
        noise = make_noise(n, rng)
        snr_db = float(rng.uniform(-5.0, 10.0))
        noisy = mix_at_snr(clean, noise, snr_db)
        scale = np.max(np.abs(noisy))
        if scale > 0.97:
            factor = 0.97 / scale
            clean, noisy = clean * factor, noisy * factor
        clean_path = out_dir / f"clean_{i:04d}.wav"
        noisy_path = out_dir / f"noisy_{i:04d}.wav"
        write_wav(clean_path, clean, rate)
        write_wav(noisy_path, noisy, rate)
        rows.append((str(clean_path), str(noisy_path), f"{snr_db:.3f}"))
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["clean_path", "noisy_path", "snr_db"])
        writer.writerows(rows)
    return manifest


def read_manifest(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"manifest is empty: {path}")
    for row in rows:
        if "clean_path" not in row or "noisy_path" not in row:
            raise DataError(f"manifest needs clean_path/noisy_path columns: {path}")
    return rows
