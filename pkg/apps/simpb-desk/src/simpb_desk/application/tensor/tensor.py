# What it is: the smallest tensor that can train a transformer decoder.
# A Tensor wraps a float64 numpy array. When an operation runs while a Tape is active and
# any input requires a gradient, the result is appended to the tape together with a
# closure mapping the output gradient to input gradients. Tape.backward walks the
# recording in exact reverse order, which is a valid reverse topological order because
# every input was created (and recorded) before the operation that consumes it.

from __future__ import annotations

from contextvars import ContextVar
from typing import Callable, Sequence

import numpy as np

from ...exceptions import UsageError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

# one active tape per context: concurrent passes on different threads do not share it
_ACTIVE_TAPE: ContextVar["Tape | None"] = ContextVar("simpb_active_tape", default=None)


class Tensor:
    """Dense float64 array with an optional gradient buffer.

    Attributes:
        values: Row-major float64 data.
        requires_grad: Whether backward should populate `grad`.
        grad: Same-shape gradient buffer, present after backward.
        name: Optional label (parameter name) used in error messages and checkpoints.
    """

    __slots__ = ("values", "requires_grad", "grad", "name", "_parents", "_backward", "_tape")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None) -> None:
        self.values = np.array(values, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._tape: Tape | None = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> Tensor:
        return Tensor(self.values.copy())

    def zero_grad(self) -> None:
        self.grad = None

    # Operators delegate to ops so the tape sees them.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops

        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops

        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


def as_tensor(value) -> Tensor:
    """Wrap arrays and scalars as constant tensors; pass tensors through."""

    return value if isinstance(value, Tensor) else Tensor(value)


class Tape:
    """Ordered record of differentiable operations for one forward/backward pass.

    Usage:
        with Tape() as tape:
            loss = model(...)
        tape.backward(loss)
    """

    def __init__(self) -> None:
        self.nodes: list[Tensor] = []
        self._token = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn: BackwardFn) -> None:
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
        out._tape = self
        self.nodes.append(out)

    def backward(self, loss: Tensor) -> None:
        """Populate `.grad` of every requires_grad tensor that `loss` depends on.

        Leaf gradients accumulate (call `zero_grad` between steps); intermediate
        gradients are recomputed from scratch on every call.

        Raises:
            UsageError: If `loss` is not a scalar or does not depend on anything trainable.
        """
        if loss.values.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            raise UsageError("loss does not depend on any tensor that requires grad")

        for node in self.nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.values)

        for node in reversed(self.nodes):
            if node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, grad in zip(node._parents, parent_grads):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.array(grad, dtype=np.float64).reshape(parent.shape)
                else:
                    parent.grad = parent.grad + grad.reshape(parent.shape)


def current_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def make_result(values: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn) -> Tensor:
    """Wrap an op's forward output; record it when a tape is active and grads are needed."""

    out = Tensor(values)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(p.requires_grad for p in parents):
        tape.record(out, parents, backward_fn)
    return out


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar loss recorded on a tape."""

    if loss.values.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:
        if loss.requires_grad:
            # the loss is itself a leaf
            loss.grad = np.ones_like(loss.values) if loss.grad is None else loss.grad + 1.0
            return
        raise UsageError("loss was not recorded on a tape; run the forward pass inside `with Tape():`")
    loss._tape.backward(loss)


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None
