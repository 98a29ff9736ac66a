"""Named parameter store with gradient slots and deterministic init."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


class ParamStore:
    """Ordered mapping of parameter name -> Tensor(requires_grad=True)."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ShapeError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.items())

    def names(self):
        return list(self._params.keys())

    def zero_grad(self):
        for t in self._params.values():
            t.zero_grad()

    def num_scalars(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v.data.copy()) for k, v in self._params.items())

    def load_state_dict(self, state: dict) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise ShapeError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, t in self._params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ShapeError(f"shape mismatch for {k}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()
            t.grad = None


def conv_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    """Scaled-normal initialization, variance 1/fan_in."""
    return rng.standard_normal(shape) / np.sqrt(fan_in)
