"""Diffusion time-step schedules and latency/real-time-factor accounting."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import DomainError
from .sde import BbedParams
from .spectral import StftConfig


@dataclass(frozen=True)
class ScheduleVector:
    """Strictly ascending diffusion time-steps, pinned to epsilon and t_max."""

    steps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "steps", np.asarray(self.steps, dtype=np.float64))
        if self.steps.ndim != 1 or len(self.steps) < 2:
            raise DomainError("schedule needs at least two steps")
        if not np.all(np.diff(self.steps) > 0):
            raise DomainError("schedule must be strictly ascending")

    def __len__(self) -> int:
        return len(self.steps)


def inference_schedule(B: int, p: BbedParams) -> ScheduleVector:
    """Fixed linear spacing from epsilon to t_max inclusive."""
    if B < 2:
        raise DomainError(f"need B >= 2 schedule steps, got {B}")
    return ScheduleVector(np.linspace(p.epsilon, p.t_max, B))


def training_schedule(B: int, p: BbedParams, rng: np.random.Generator) -> ScheduleVector:
    """Endpoints pinned; interior steps i.i.d. uniform on (epsilon, t_max), sorted.

    Ties (including against the endpoints) are resolved by resampling so the
    result is strictly ascending.
    """
    if B < 2:
        raise DomainError(f"need B >= 2 schedule steps, got {B}")
    while True:
        interior = np.sort(rng.uniform(p.epsilon, p.t_max, size=B - 2))
        steps = np.concatenate([[p.epsilon], interior, [p.t_max]])
        if np.all(np.diff(steps) > 0):
            return ScheduleVector(steps)


@dataclass
class LatencyReport:
    """Per-run latency accounting; total = algorithmic + one hop."""

    algorithmic_latency: float
    hop_time: float
    total_latency: float
    rtf: float

    def to_json(self, **extra) -> str:
        d = asdict(self)
        d.update(extra)
        return json.dumps(d)


def algorithmic_latency(cfg: StftConfig, d: int) -> float:
    """Seconds of intrinsic delay: n_fft/f_s + d*hop/f_s."""
    if d < 0:
        raise DomainError(f"output delay must be nonnegative, got {d}")
    return cfg.n_fft / cfg.sample_rate + d * cfg.hop / cfg.sample_rate


def rtf(proc_time: float, cfg: StftConfig) -> float:
    """Processing time of one step divided by the hop duration."""
    if proc_time < 0:
        raise DomainError("processing time must be nonnegative")
    return proc_time / cfg.hop_time


def make_report(cfg: StftConfig, d: int, measured_rtf: float) -> LatencyReport:
    alg = algorithmic_latency(cfg, d)
    return LatencyReport(
        algorithmic_latency=alg,
        hop_time=cfg.hop_time,
        total_latency=alg + cfg.hop_time,
        rtf=measured_rtf,
    )
