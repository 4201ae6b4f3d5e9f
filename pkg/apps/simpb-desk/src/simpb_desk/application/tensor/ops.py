"""Differentiable operations on Tensor.

Broadcasting is limited to leading dimensions: an operand may be a shape-suffix of the
other (a bias over rows, a mask shared by all heads, a scalar), anything else is a
ShapeError. Gradients of broadcast operands are summed over the broadcast axes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ...exceptions import ContractError, ShapeError, UsageError
from .tensor import Tensor, as_tensor, make_result

LAYER_NORM_EPS = 1e-5


def _suffix_broadcast_shape(op: str, a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    if a == b:
        return a
    if len(a) >= len(b) and a[len(a) - len(b):] == b:
        return a
    if len(b) > len(a) and b[len(b) - len(a):] == a:
        return b
    raise ShapeError(op, a, b)


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape` (leading axes only)."""

    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad.reshape(shape)


# --- elementwise binary -----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_broadcast_shape("add", a.shape, b.shape)

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(g, b.shape)

    return make_result(a.values + b.values, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_broadcast_shape("sub", a.shape, b.shape)

    def backward(g):
        return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)

    return make_result(a.values - b.values, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_broadcast_shape("mul", a.shape, b.shape)

    def backward(g):
        return _reduce_to(g * b.values, a.shape), _reduce_to(g * a.values, b.shape)

    return make_result(a.values * b.values, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_broadcast_shape("div", a.shape, b.shape)

    def backward(g):
        return (
            _reduce_to(g / b.values, a.shape),
            _reduce_to(-g * a.values / (b.values * b.values), b.shape),
        )

    return make_result(a.values / b.values, (a, b), backward)


def maximum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_broadcast_shape("maximum", a.shape, b.shape)
    pick_a = a.values >= b.values

    def backward(g):
        return _reduce_to(g * pick_a, a.shape), _reduce_to(g * ~pick_a, b.shape)

    return make_result(np.maximum(a.values, b.values), (a, b), backward)


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _suffix_broadcast_shape("minimum", a.shape, b.shape)
    pick_a = a.values <= b.values

    def backward(g):
        return _reduce_to(g * pick_a, a.shape), _reduce_to(g * ~pick_a, b.shape)

    return make_result(np.minimum(a.values, b.values), (a, b), backward)


# --- elementwise unary ------------------------------------------------------------------


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.values)
    return make_result(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return make_result(np.log(x.values), (x,), lambda g: (g / x.values,))


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.values))  # overflow-free logistic
    return make_result(out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x: Tensor) -> Tensor:
    active = x.values > 0
    return make_result(np.where(active, x.values, 0.0), (x,), lambda g: (g * active,))


def abs(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return make_result(np.abs(x.values), (x,), lambda g: (g * np.sign(x.values),))


def power(x: Tensor, exponent: float) -> Tensor:
    """x ** exponent for x >= 0 (used by the focal modulating factor)."""

    base = x.values
    out = np.power(base, exponent)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            local = np.where(base > 0, exponent * np.power(base, exponent - 1.0), 0.0)
        if exponent == 1.0:
            local = np.ones_like(base)
        return (g * local,)

    return make_result(out, (x,), backward)


def clamp_min(x: Tensor, lower: float) -> Tensor:
    keep = x.values > lower
    return make_result(np.where(keep, x.values, lower), (x,), lambda g: (g * keep,))


# --- reductions and reshaping -------------------------------------------------------------


def sum(x: Tensor, axis: int | tuple[int, ...] | None = None) -> Tensor:  # noqa: A001
    out = x.values.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return make_result(out, (x,), backward)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / max(count, 1))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = x.values.reshape(tuple(shape))
    return make_result(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(np.transpose(x.values, axes), (x,), lambda g: (np.transpose(g, inverse),))


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, axes)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise UsageError("concat needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.values for t in tensors], axis=axis)

    def backward(g):
        return tuple(
            np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:])
        )

    return make_result(out, tuple(tensors), backward)


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    """x[..., start:stop]."""

    def backward(g):
        full = np.zeros_like(x.values)
        full[..., start:stop] = g
        return (full,)

    return make_result(x.values[..., start:stop], (x,), backward)


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """out[j] = x[index[j]] along the first axis."""

    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(x.values)
        np.add.at(full, index, g)
        return (full,)

    return make_result(x.values[index], (x,), backward)


def segment_sum(x: Tensor, segment: np.ndarray, num_segments: int) -> Tensor:
    """out[i] = sum of x[j] over j with segment[j] == i (rows with no members are zero)."""

    segment = np.asarray(segment, dtype=np.int64)
    out = np.zeros((num_segments,) + x.shape[1:])
    np.add.at(out, segment, x.values)
    return make_result(out, (x,), lambda g: (g[segment],))


# --- linear algebra -----------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Batched matrix product a[..., p, q] @ b[..., q, r]."""

    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    _suffix_broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])

    def backward(g):
        ga = g @ np.swapaxes(b.values, -1, -2)
        gb = np.swapaxes(a.values, -1, -2) @ g
        return _reduce_to(ga, a.shape), _reduce_to(gb, b.shape)

    return make_result(a.values @ b.values, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x @ W + b with W of shape [d_in, d_out]."""

    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError("linear", x.shape, weight.shape)
    if x.ndim == 1:
        out = reshape(matmul(reshape(x, (1, -1)), weight), (weight.shape[1],))
    else:
        out = matmul(x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ShapeError("linear", weight.shape, bias.shape)
        out = add(out, bias)
    return out


# --- normalisation and attention primitives ----------------------------------------------


def masked_softmax(logits: Tensor, mask=None) -> Tensor:
    """Softmax over the last axis with an additive {0, -inf} mask.

    Masked positions come out exactly 0. The row maximum is taken over unmasked entries.

    Raises:
        ContractError: If some row has every entry masked.
    """
    z = logits.values
    if mask is not None:
        mask_values = mask.values if isinstance(mask, Tensor) else np.asarray(mask, dtype=np.float64)
        _suffix_broadcast_shape("masked_softmax", z.shape, mask_values.shape)
        z = z + mask_values
    allowed = np.isfinite(z)
    if not np.all(allowed.any(axis=-1)):
        raise ContractError("masked_softmax: a row has every position masked")
    if z.size == 0:
        return make_result(np.zeros_like(z), (logits,), lambda g: (np.zeros_like(z),))
    row_max = np.max(np.where(allowed, z, -np.inf), axis=-1, keepdims=True)
    e = np.where(allowed, np.exp(np.where(allowed, z - row_max, 0.0)), 0.0)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_result(out, (logits,), backward)


def softmax(logits: Tensor) -> Tensor:
    return masked_softmax(logits, None)


def layer_norm(x: Tensor, gamma: Tensor | None = None, beta: Tensor | None = None, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalise over the last axis, then apply the optional affine (gamma, beta)."""

    mu = x.values.mean(axis=-1, keepdims=True)
    centered = x.values - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std

    def backward(g):
        g_mean = g.mean(axis=-1, keepdims=True)
        gx_mean = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv_std * (g - g_mean - xhat * gx_mean),)

    out = make_result(xhat, (x,), backward)
    if gamma is not None:
        out = mul(out, gamma)
    if beta is not None:
        out = add(out, beta)
    return out


def bilinear_sample(featmap: Tensor, points) -> Tensor:
    """Bilinearly sample featmap[H, W, C] at P points given as (u, v) in cell units.

    Cell (i, j) sits at (u=j, v=i). Padding is zero per corner: a sample is fully outside
    when none of its four neighbouring cells is on the grid (u <= -1, u >= W, v <= -1 or
    v >= H) and then reads exactly zero. Within one cell of the border it fades linearly
    from the edge cell to zero. Gradients flow to the feature map and, when `points` is a
    Tensor, to the point coordinates.
    """
    points = as_tensor(points)
    if featmap.ndim != 3 or points.ndim != 2 or points.shape[1] != 2:
        raise ShapeError("bilinear_sample", featmap.shape, points.shape)
    H, W, C = featmap.shape
    u, v = points.values[:, 0], points.values[:, 1]
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = u - x0
    fy = v - y0

    corners = []  # (rows, cols, weight, d_weight/du, d_weight/dv, inside)
    for dy, dx in ((0, 0), (0, 1), (1, 0), (1, 1)):
        rows, cols = y0 + dy, x0 + dx
        wx = fx if dx else 1.0 - fx
        wy = fy if dy else 1.0 - fy
        dwx = 1.0 if dx else -1.0
        dwy = 1.0 if dy else -1.0
        inside = (rows >= 0) & (rows < H) & (cols >= 0) & (cols < W)
        corners.append((np.clip(rows, 0, H - 1), np.clip(cols, 0, W - 1), wx * wy, dwx * wy, wx * dwy, inside))

    out = np.zeros((points.shape[0], C))
    gathered = []
    for rows, cols, weight, _, _, inside in corners:
        value = featmap.values[rows, cols] * inside[:, None]
        gathered.append(value)
        out += weight[:, None] * value

    def backward(g):
        g_feat = np.zeros_like(featmap.values)
        g_points = np.zeros_like(points.values)
        for (rows, cols, weight, dwdu, dwdv, inside), value in zip(corners, gathered):
            np.add.at(g_feat, (rows, cols), g * (weight * inside)[:, None])
            proj = (g * value).sum(axis=1)
            g_points[:, 0] += dwdu * proj
            g_points[:, 1] += dwdv * proj
        return g_feat, g_points

    return make_result(out, (featmap, points), backward)


# --- losses ----------------------------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Elementwise binary cross-entropy on logits (numerically stable form)."""

    x = logits.values
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != x.shape:
        raise ShapeError("bce_with_logits", x.shape, t.shape)
    out = np.maximum(x, 0.0) - x * t + np.log1p(np.exp(-np.abs(x)))
    p = 0.5 * (1.0 + np.tanh(0.5 * x))
    return make_result(out, (logits,), lambda g: (g * (p - t),))


def sigmoid_focal_loss(logits: Tensor, targets: np.ndarray, alpha: float = 0.25, gamma: float = 2.0) -> Tensor:
    """Elementwise focal loss: alpha_t * (1 - p_t) ** gamma * BCE."""

    t = np.asarray(targets, dtype=np.float64)
    p = sigmoid(logits)
    ce = bce_with_logits(logits, t)
    # 1 - p_t = p * (1 - t) + (1 - p) * t
    one_minus_pt = add(mul(p, 1.0 - 2.0 * t), t)
    loss = mul(ce, power(one_minus_pt, gamma))
    if alpha >= 0:
        loss = mul(loss, alpha * t + (1.0 - alpha) * (1.0 - t))
    return loss
