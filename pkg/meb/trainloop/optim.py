from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from meb.core.errors import DimensionError
from meb.numcore import Tensor


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros(param.shape), np.zeros(param.shape), 0)


def adam_step(
        param: np.ndarray,
        grad: np.ndarray,
        state: AdamState,
        lr: float,
        wd: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update with weight decay folded into the gradient; inputs are not modified."""
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != param.shape or state.m.shape != param.shape or state.v.shape != param.shape:
        raise DimensionError(f"adam_step: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    beta1, beta2 = betas
    g = grad + wd * param
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * g
    v = beta2 * state.v + (1 - beta2) * g * g
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), AdamState(m, v, t)


class Adam:
    """Adam over a named parameter set; per-parameter state can be reset when a tensor is re-initialised."""

    def __init__(self, lr: float, weight_decay: float = 0.0, betas: tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8):
        self.lr = lr
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.state: dict[str, AdamState] = {}

    def step(self, params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]) -> None:
        for name, grad in grads.items():
            tensor = params[name]
            state = self.state.get(name) or AdamState.zeros_like(tensor.data)
            updated, self.state[name] = adam_step(tensor.data, grad, state, self.lr, self.weight_decay,
                                                  self.betas, self.eps)
            tensor.data = updated.astype(tensor.data.dtype)

    def reset(self, names: Sequence[str]) -> None:
        for name in names:
            self.state.pop(name, None)


def step_lr(base_lr: float, epoch: int, milestones: Sequence[int], gamma: float) -> float:
    """Learning rate for 1-based ``epoch``: multiplied by ``gamma`` once per milestone already reached."""
    return base_lr * gamma ** sum(1 for m in milestones if epoch > m)
