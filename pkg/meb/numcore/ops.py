"""Differentiable primitives.

Every primitive computes its forward value with numpy, checks it is finite and,
when a tape is active and an input requires a gradient, records a closure that
maps the upstream gradient to one gradient per input.
"""
from typing import Sequence

import numpy as np

from meb.core.errors import DimensionError, NonFiniteError
from meb.numcore.tensor import Tensor, active_tapes, get_default_dtype

PAIRWISE_EPS = 1e-12


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(op: str, data, inputs: tuple[Tensor, ...], backward) -> Tensor:
    data = np.asarray(data, dtype=get_default_dtype())
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=requires_grad, check=False)
    if requires_grad:
        for tape in active_tapes():
            tape.record(op, out, inputs, backward)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0, dtype=np.float64)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True, dtype=np.float64)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a, b)
    return _result("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("sub", a, b)
    return _result("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("mul", a, b)
    return _result("mul", a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("div", a, b)
    return _result("div", a.data / b.data, (a, b),
                   lambda g: (_unbroadcast(g / b.data, a.shape),
                              _unbroadcast(-g * a.data / (b.data * b.data), b.shape)))


def neg(a: Tensor) -> Tensor:
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _result("matmul", a.data @ b.data, (a, b),
                   lambda g: (g @ b.data.T, a.data.T @ g))


def affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """out[i, j] = sum_k x[i, k] * W[k, j] + b[j]."""
    if x.ndim != 2 or W.ndim != 2 or b.ndim != 1 or x.shape[1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise DimensionError(f"affine: x{x.shape} W{W.shape} b{b.shape} do not conform")
    return _result("affine", x.data @ W.data + b.data, (x, W, b),
                   lambda g: (g @ W.data.T, x.data.T @ g, g.sum(axis=0, dtype=np.float64)))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _result("relu", np.where(mask, x.data, 0), (x,), lambda g: (g * mask,))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _result("tanh", out, (x,), lambda g: (g * (1 - out * out),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return _result("exp", out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _result("log", out, (x,), lambda g: (g / x.data,))


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), stable for large |x|."""
    return _result("softplus", np.logaddexp(0.0, x.data), (x,),
                   lambda g: (g * _sigmoid(x.data),))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return _result("sigmoid", out, (x,), lambda g: (g * out * (1 - out),))


def clamp(x: Tensor, low: float, high: float) -> Tensor:
    inside = (x.data >= low) & (x.data <= high)
    return _result("clamp", np.clip(x.data, low, high), (x,), lambda g: (g * inside,))


def sum_(x: Tensor, axis: int | None = None) -> Tensor:
    out = np.sum(x.data, axis=axis, dtype=np.float64)

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result("sum", out, (x,), backward)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    out = np.sum(x.data, axis=axis, dtype=np.float64) / count

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _result("mean", out, (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    tensors = tuple(tensors)
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.shape[d] != ref[d] for d in range(len(ref)) if d != axis):
            raise DimensionError(f"concat: {t.shape} does not match {ref} outside axis {axis}")
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, splits, axis=axis)))


def pad_columns(x: Tensor, width: int) -> Tensor:
    """Zero-pad a [B, w] tensor to [B, width]."""
    if x.ndim != 2 or x.shape[1] > width:
        raise DimensionError(f"pad_columns: cannot pad {x.shape} to width {width}")
    out = np.zeros((x.shape[0], width), dtype=x.data.dtype)
    out[:, : x.shape[1]] = x.data
    return _result("pad_columns", out, (x,), lambda g: (g[:, : x.shape[1]],))


def take_rows(x: Tensor, index) -> Tensor:
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, g)
        return (grad,)

    return _result("take_rows", x.data[index], (x,), backward)


def gather(x: Tensor, rows, cols) -> Tensor:
    """out[n] = x[rows[n], cols[n]]."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    def backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, (rows, cols), g)
        return (grad,)

    return _result("gather", x.data[rows, cols], (x,), backward)


def softmax(x: Tensor) -> Tensor:
    z = x.data - np.max(x.data, axis=1, keepdims=True)
    e = np.exp(z)
    out = e / np.sum(e, axis=1, keepdims=True, dtype=np.float64)
    out = out.astype(x.data.dtype)
    return _result("softmax", out, (x,),
                   lambda g: (out * (g - np.sum(g * out, axis=1, keepdims=True, dtype=np.float64)),))


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - np.max(x.data, axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=1, keepdims=True, dtype=np.float64))
    out = z - lse
    probs = np.exp(out)
    return _result("log_softmax", out, (x,),
                   lambda g: (g - probs * np.sum(g, axis=1, keepdims=True, dtype=np.float64),))


def pairwise_l2(A: Tensor, C: Tensor) -> Tensor:
    """out[i, j] = ||A[i] - C[j]||, with a small constant under the root."""
    if A.ndim != 2 or C.ndim != 2 or A.shape[1] != C.shape[1]:
        raise DimensionError(f"pairwise_l2: feature dims of {A.shape} and {C.shape} differ")
    diff = A.data[:, None, :].astype(np.float64) - C.data[None, :, :].astype(np.float64)
    dist = np.sqrt(np.sum(diff * diff, axis=2) + PAIRWISE_EPS)

    def backward(g):
        scaled = g / dist
        return (np.einsum("ij,ijd->id", scaled, diff), -np.einsum("ij,ijd->jd", scaled, diff))

    return _result("pairwise_l2", dist, (A, C), backward)
