"""Closed-form Brownian-bridge-style SDE kernel.

The forward process interpolates clean x0 toward the noisy anchor y with
drift (y - x)/(1 - t) and diffusion sqrt(c) * r**t.  Mean and variance of the
state admit closed forms; the variance involves the exponential integral Ei,
implemented here with a certified two-regime scheme.

All operations are pure; complex inputs may be scalars or arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, SingularityError

_EULER_GAMMA = 0.5772156649015328606


@dataclass(frozen=True)
class BbedParams:
    c: float = 0.08
    r: float = 2.6
    t_max: float = 0.999
    epsilon: float = 0.03

    def __post_init__(self):
        if not (0.0 < self.epsilon < self.t_max < 1.0):
            raise DomainError(f"need 0 < epsilon < t_max < 1, got {self.epsilon}, {self.t_max}")
        if self.c <= 0.0:
            raise DomainError("c must be positive")
        if self.r <= 0.0 or self.r == 1.0:
            raise DomainError("r must be positive and != 1")


@dataclass(frozen=True)
class KernelValue:
    """Gaussian state distribution at one diffusion time: mean and std."""

    mean: complex | np.ndarray
    std: float


def _check_unit_interval(t: float) -> float:
    t = float(t)
    if not (0.0 <= t <= 1.0):
        raise DomainError(f"diffusion time must lie in [0, 1], got {t}")
    return t


def mean_evolution(x0, y, t: float):
    """(1 - t) * x0 + t * y."""
    t = _check_unit_interval(t)
    return (1.0 - t) * x0 + t * y


def _ei_series(x: float) -> float:
    # gamma + ln|x| + sum x^n / (n * n!); cancellation-free for x > 0,
    # acceptable for -6 <= x < 0.
    acc = 0.0
    term = 1.0
    n = 1
    while n < 600:
        term *= x / n
        contrib = term / n
        acc += contrib
        if n > abs(x) + 4 and abs(contrib) <= 1e-18 * max(1.0, abs(acc)):
            break
        n += 1
    return _EULER_GAMMA + math.log(abs(x)) + acc


def _e1_continued_fraction(z: float) -> float:
    # Modified Lentz evaluation of the standard continued fraction for E1(z),
    # reliable for z > 1; used here for z > 6.
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 200):
        a = -float(i) * float(i)
        b += 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-z)


def exp_integral_ei(x: float) -> float:
    """Principal-value exponential integral Ei(x), x != 0."""
    x = float(x)
    if x == 0.0:
        raise SingularityError("Ei is singular at x = 0")
    if x < -6.0:
        return -_e1_continued_fraction(-x)
    return _ei_series(x)


def variance(t: float, p: BbedParams) -> float:
    """Closed-form sigma^2(t); exactly 0 at both endpoints."""
    t = _check_unit_interval(t)
    if t == 0.0 or t == 1.0:
        return 0.0
    logr = math.log(p.r)
    big_e = exp_integral_ei(2.0 * (t - 1.0) * logr) - exp_integral_ei(-2.0 * logr)
    val = (1.0 - t) * p.c * ((p.r ** (2.0 * t) - 1.0 + t) + 2.0 * p.r**2 * logr * (1.0 - t) * big_e)
    if val < 0.0:
        if val < -1e-12:
            raise NumericError(f"variance({t}) evaluated to {val}")
        val = 0.0
    return val


def std(t: float, p: BbedParams) -> float:
    return math.sqrt(variance(t, p))


def drift(x, y, t: float):
    """(y - x) / (1 - t); reverse solvers must never evaluate this at t = 1."""
    t = float(t)
    if t >= 1.0:
        raise SingularityError(f"drift is singular at t >= 1, got t={t}")
    if t < 0.0:
        raise DomainError(f"diffusion time must be nonnegative, got {t}")
    return (y - x) / (1.0 - t)


def diffusion(t: float, p: BbedParams) -> float:
    """g(t) = sqrt(c) * r**t."""
    return math.sqrt(p.c) * p.r ** float(t)


def complex_standard_normal(rng: np.random.Generator, shape=None):
    """Circularly-symmetric complex normal, unit total variance (1/2 per part)."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * math.sqrt(0.5)


def perturbation_kernel(x0, y, t: float, p: BbedParams) -> KernelValue:
    return KernelValue(mean=mean_evolution(x0, y, t), std=std(t, p))


def sample_perturbation(x0, y, t: float, p: BbedParams, rng: np.random.Generator):
    """Draw from the state distribution: mean_evolution + sigma(t) * z."""
    kv = perturbation_kernel(x0, y, t, p)
    shape = np.shape(kv.mean) if np.ndim(kv.mean) else None
    return kv.mean + kv.std * complex_standard_normal(rng, shape)
