from typing import Callable, Sequence

import numpy as np

from meb.numcore.tensor import GradTape, Tensor


def numerical_gradient(fn: Callable[..., Tensor], inputs: Sequence[Tensor], step: float = 1e-3) -> list[np.ndarray]:
    grads = []
    for tensor in inputs:
        tensor.data = np.ascontiguousarray(tensor.data)
        grad = np.zeros_like(tensor.data, dtype=np.float64)
        flat = tensor.data.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            upper = float(fn(*inputs).data)
            flat[i] = original - step
            lower = float(fn(*inputs).data)
            flat[i] = original
            grad.reshape(-1)[i] = (upper - lower) / (2 * step)
        grads.append(grad)
    return grads


def analytic_gradient(fn: Callable[..., Tensor], inputs: Sequence[Tensor]) -> list[np.ndarray]:
    with GradTape() as tape:
        out = fn(*inputs)
    return tape.gradient(out, inputs)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[Tensor], step: float = 1e-3) -> float:
    """Largest relative error between analytic and central-difference gradients over ``inputs``.

    Inputs should be float64 tensors (see ``precision``) with ``requires_grad`` set.
    """
    analytic = analytic_gradient(fn, inputs)
    numeric = numerical_gradient(fn, inputs, step)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))
