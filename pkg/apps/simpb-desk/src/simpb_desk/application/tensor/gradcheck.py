from typing import Callable

import numpy as np

from .tensor import Tape, Tensor


def finite_diff_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Compare the tape gradient of a scalar function with central differences.

    Args:
        f: Scalar-valued function of `x`. Other tensors it closes over are held fixed.
        x: Point of evaluation; its values are restored afterwards.
        eps: Central-difference step.
        floor: Lower bound of the relative-error denominator.

    Returns:
        float: max over coordinates of |analytic - fd| / max(|analytic|, |fd|, floor).
    """
    was_required = x.requires_grad
    x.requires_grad = True
    x.grad = None
    with Tape() as tape:
        loss = f(x)
    tape.backward(loss)
    analytic = np.zeros_like(x.values) if x.grad is None else x.grad.copy()
    x.grad = None
    x.requires_grad = was_required

    base = x.values.copy()
    numeric = np.empty_like(base)
    try:
        for idx in np.ndindex(base.shape):
            x.values[idx] = base[idx] + eps
            f_plus = f(x).item()
            x.values[idx] = base[idx] - eps
            f_minus = f(x).item()
            x.values[idx] = base[idx]
            numeric[idx] = (f_plus - f_minus) / (2.0 * eps)
    finally:
        x.values[...] = base

    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / scale))
