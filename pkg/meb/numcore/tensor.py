import contextvars
from contextlib import contextmanager
from typing import Callable, NamedTuple, Sequence

import numpy as np

from meb.core.errors import NonFiniteError

_default_dtype: contextvars.ContextVar[type] = contextvars.ContextVar("default_dtype", default=np.float32)
_active_tapes: contextvars.ContextVar[tuple] = contextvars.ContextVar("active_tapes", default=())


def get_default_dtype() -> type:
    return _default_dtype.get()


@contextmanager
def precision(dtype):
    """Switch the float type of newly created tensors, e.g. float64 for gradient checks."""
    token = _default_dtype.set(np.dtype(dtype).type)
    try:
        yield
    finally:
        _default_dtype.reset(token)


def active_tapes() -> tuple:
    return _active_tapes.get()


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, *, check: bool = True):
        arr = np.asarray(data, dtype=get_default_dtype())
        if check and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"tensor {name or '<unnamed>'} holds non-finite values")
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, check=False)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        from meb.numcore.ops import add
        return add(self, other)

    def __radd__(self, other):
        from meb.numcore.ops import add
        return add(other, self)

    def __sub__(self, other):
        from meb.numcore.ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from meb.numcore.ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from meb.numcore.ops import mul
        return mul(self, other)

    def __rmul__(self, other):
        from meb.numcore.ops import mul
        return mul(other, self)

    def __truediv__(self, other):
        from meb.numcore.ops import div
        return div(self, other)

    def __neg__(self):
        from meb.numcore.ops import neg
        return neg(self)

    def __matmul__(self, other):
        from meb.numcore.ops import matmul
        return matmul(self, other)

    def sum(self, axis: int | None = None):
        from meb.numcore.ops import sum_
        return sum_(self, axis=axis)

    def mean(self, axis: int | None = None):
        from meb.numcore.ops import mean
        return mean(self, axis=axis)


class _Record(NamedTuple):
    op: str
    out: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class GradTape:
    """Ordered record of primitive operations; replayed backwards by ``gradient``.

    Operations are recorded only while the tape is entered and only when one of
    their inputs requires a gradient.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self.backward_order: list[str] = []

    def __enter__(self) -> "GradTape":
        self._token = _active_tapes.set(active_tapes() + (self,))
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        _active_tapes.reset(self._token)

    @property
    def ops(self) -> list[str]:
        return [record.op for record in self._records]

    def record(self, op: str, out: Tensor, inputs: tuple[Tensor, ...], backward) -> None:
        self._records.append(_Record(op, out, inputs, backward))

    def gradient(self, target: Tensor, sources: Sequence[Tensor], seed: np.ndarray | None = None) -> list[np.ndarray]:
        grads: dict[int, np.ndarray] = {
            id(target): np.ones_like(target.data) if seed is None else np.asarray(seed, dtype=target.data.dtype)
        }
        self.backward_order = []
        for record in reversed(self._records):
            upstream = grads.get(id(record.out))
            if upstream is None:
                continue
            self.backward_order.append(record.op)
            for tensor, grad in zip(record.inputs, record.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                grad = np.asarray(grad, dtype=tensor.data.dtype)
                grads[key] = grads[key] + grad if key in grads else grad
        return [grads.get(id(source), np.zeros_like(source.data)) for source in sources]
