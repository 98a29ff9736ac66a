"""WAV input/output: 16-bit signed PCM, mono, little-endian.

Anything else (other sample widths, channel counts, rates when a rate is
required) is rejected with a descriptive DataError.  Samples are float64 in
[-1, 1) internally.
"""

from __future__ import annotations

import wave

import numpy as np

from .errors import DataError


def read_wav(path, expect_rate: int | None = 16000) -> tuple[np.ndarray, int]:
    """Return (samples, sample_rate). Pass expect_rate=None to accept any rate."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            comptype = wf.getcomptype()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
    if comptype != "NONE":
        raise DataError(f"{path}: compressed WAV ({comptype}) not supported, need PCM")
    if sampwidth != 2:
        raise DataError(f"{path}: need 16-bit PCM, got {8 * sampwidth}-bit")
    if n_channels != 1:
        raise DataError(f"{path}: need mono audio, got {n_channels} channels")
    if expect_rate is not None and rate != expect_rate:
        raise DataError(f"{path}: need {expect_rate} Hz, got {rate} Hz")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples: np.ndarray, rate: int = 16000) -> None:
    samples = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(samples)):
        raise DataError("refusing to write non-finite samples")
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())
