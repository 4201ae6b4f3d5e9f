# AdamW on the ParameterStore: adaptive moments plus decoupled weight decay.
# Moments live in numpy arrays keyed by parameter name, so the checkpoint writer can store
# them next to the parameters as "adam.m.<name>" / "adam.v.<name>".

import numpy as np

from ...domain import ModelConfig
from ...exceptions import UsageError
from ..tensor import ParameterStore


class AdamW:
    """Adam with decoupled weight decay and optional global-norm gradient clipping.

    Weight decay applies to matrices only; biases, norm scales and 1D buffers are not
    decayed. Parameters without a gradient are updated with a zero gradient.
    """

    def __init__(self, params: ParameterStore, config: ModelConfig) -> None:
        self.params = params
        self.lr = config.learning_rate
        self.weight_decay = config.weight_decay
        self.beta1 = config.adam_beta1
        self.beta2 = config.adam_beta2
        self.eps = config.adam_eps
        self.clip_norm = config.grad_clip_norm
        self.step_count = 0
        self.m = {name: np.zeros(p.shape) for name, p in params.items()}
        self.v = {name: np.zeros(p.shape) for name, p in params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {name: (p.grad if p.grad is not None else np.zeros(p.shape)) for name, p in self.params.items()}

    @staticmethod
    def global_norm(grads: dict[str, np.ndarray]) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))

    def step(self) -> float:
        """Apply one update from the current `.grad` buffers.

        Returns:
            float: Global gradient norm before clipping.
        """
        grads = self.gradients()
        norm = self.global_norm(grads)
        scale = 1.0
        if self.clip_norm is not None and norm > self.clip_norm:
            scale = self.clip_norm / (norm + 1e-12)

        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for name, param in self.params.items():
            g = grads[name] * scale
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            update = (self.m[name] / bias1) / (np.sqrt(self.v[name] / bias2) + self.eps)
            if param.ndim >= 2 and self.weight_decay:
                update = update + self.weight_decay * param.values
            param.values = param.values - self.lr * update
        return norm

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {}
        for name in self.params.names():
            state[f"adam.m.{name}"] = self.m[name].copy()
            state[f"adam.v.{name}"] = self.v[name].copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], step_count: int) -> None:
        for name, param in self.params.items():
            for prefix, target in (("adam.m.", self.m), ("adam.v.", self.v)):
                key = prefix + name
                if key not in state:
                    raise UsageError(f"optimizer state is missing {key!r}")
                values = np.asarray(state[key], dtype=np.float64)
                if values.shape != param.shape:
                    raise UsageError(f"optimizer state {key!r}: expected shape {param.shape}, got {values.shape}")
                target[name] = values.copy()
        self.step_count = int(step_count)
