# A flat, ordered registry of learnable tensors. Layers register their weights under
# dotted names ("hybrid.0.self_attn.q.weight"); the optimizer and the checkpoint writer
# walk the registry in insertion order, which keeps both deterministic.

from collections import OrderedDict
from typing import Iterator

import numpy as np

from ...exceptions import UsageError
from .tensor import Tensor


class ParameterStore:
    """Named learnable tensors, created with seeded initialisers."""

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self._params: OrderedDict[str, Tensor] = OrderedDict()

    def __len__(self) -> int:
        return len(self._params)

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self._params.values())

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def create(self, name: str, shape: tuple[int, ...], init: str = "xavier") -> Tensor:
        """Register a new parameter.

        Args:
            name: Unique dotted name.
            shape: Parameter shape.
            init: One of "xavier" (uniform, fan-in + fan-out of the last two axes),
                "zeros", "ones", "normal" (std 0.02).
        """
        if name in self._params:
            raise UsageError(f"parameter {name!r} registered twice")
        if init == "xavier":
            fan_in, fan_out = (shape[-2], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            values = self.rng.uniform(-bound, bound, size=shape)
        elif init == "zeros":
            values = np.zeros(shape)
        elif init == "ones":
            values = np.ones(shape)
        elif init == "normal":
            values = self.rng.normal(0.0, 0.02, size=shape)
        else:
            raise UsageError(f"unknown initialiser {init!r}")
        param = Tensor(values, requires_grad=True, name=name)
        self._params[name] = param
        return param

    def add(self, name: str, values: np.ndarray) -> Tensor:
        """Register a parameter with explicit initial values."""

        if name in self._params:
            raise UsageError(f"parameter {name!r} registered twice")
        param = Tensor(values, requires_grad=True, name=name)
        self._params[name] = param
        return param

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.grad = None

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, p.values.copy()) for name, p in self._params.items())

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise UsageError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, param in self._params.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise UsageError(f"parameter {name!r}: expected shape {param.shape}, got {values.shape}")
            param.values = values.copy()
