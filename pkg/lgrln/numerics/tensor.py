"""Dense 64-bit tensors and a reverse-mode gradient tape.

A :class:`GradTape` is opened as a context manager; every differentiable
operation executed while it is active, and whose output depends on a tensor
with ``requires_grad``, is appended to the tape in execution order. Execution
order is a topological order, so :func:`backward` walks the records in
reverse exactly once.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from lgrln.errors import ContractError, TapeStateError

logger = logging.getLogger(__name__)

DTYPE = np.float64

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]
VJP = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Row-major float64 array with an optional gradient requirement."""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def wrap(cls, data: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Adopt a freshly computed array without copying it."""
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=DTYPE)
        out.requires_grad = requires_grad
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def T(self) -> "Tensor":
        from lgrln.numerics import ops

        return ops.transpose(self)

    def item(self) -> float:
        """Return the value of a single-element tensor."""
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Return a copy of the underlying array."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        """Return a constant tensor sharing no history."""
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.add(self, other)

    def __radd__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.add(other, self)

    def __sub__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.sub(self, other)

    def __rsub__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.sub(other, self)

    def __mul__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.mul(self, other)

    def __rmul__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.mul(other, self)

    def __truediv__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.div(self, other)

    def __rtruediv__(self, other: "TensorLike") -> "Tensor":
        from lgrln.numerics import ops

        return ops.div(other, self)

    def __neg__(self) -> "Tensor":
        from lgrln.numerics import ops

        return ops.neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from lgrln.numerics import ops

        return ops.matmul(self, other)

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        from lgrln.numerics import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        from lgrln.numerics import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)


TensorLike = Union[Tensor, float, int, np.ndarray]


@dataclass
class _Record:
    output: Tensor
    inputs: Tuple[Tensor, ...]
    vjp: VJP
    op: str


_local = threading.local()


def _tape_stack() -> List["GradTape"]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> Optional["GradTape"]:
    """Return the innermost tape open on this thread, if any."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class GradTape:
    """Records differentiable operations for one backward pass."""

    def __init__(self) -> None:
        self._records: List[_Record] = []
        self._consumed = False

    def __enter__(self) -> "GradTape":
        if self._consumed:
            raise TapeStateError("Tape was already consumed by backward(); record a new one")
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc: object) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def consumed(self) -> bool:
        return self._consumed

    def record(self, output: Tensor, inputs: Tuple[Tensor, ...], vjp: VJP, op: str) -> None:
        """Append one operation to the tape."""
        if self._consumed:
            raise TapeStateError("Cannot record on a consumed tape")
        self._records.append(_Record(output, inputs, vjp, op))

    def _mark_consumed(self) -> Iterator[_Record]:
        self._consumed = True
        return reversed(self._records)


def apply_op(op: str, data: np.ndarray, inputs: Tuple[Tensor, ...], vjp: VJP) -> Tensor:
    """Wrap a forward result and record it when gradients are needed.

    Args:
        op: Operation name kept for debugging
        data: Forward result
        inputs: Tensors the result depends on
        vjp: Maps the output gradient to one gradient (or None) per input

    Returns:
        Result tensor
    """
    requires = any(t.requires_grad for t in inputs)
    out = Tensor.wrap(data, requires_grad=requires)
    if requires:
        tape = active_tape()
        if tape is not None:
            tape.record(out, inputs, vjp, op)
    return out


class Gradients:
    """Gradient map returned by :func:`backward`.

    Lookup by tensor; tensors that did not influence the loss get an exact
    zero array of their own shape.
    """

    def __init__(self, grads: Dict[int, np.ndarray], tape: GradTape):
        self._grads = grads
        self._tape = tape

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        grad = self._grads.get(id(tensor))
        if grad is None:
            return np.zeros_like(tensor.data)
        return grad

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._grads


def backward(loss: Tensor, tape: GradTape) -> Gradients:
    """Run reverse-mode differentiation over a recorded tape.

    Args:
        loss: Scalar tensor produced while ``tape`` was active
        tape: Tape holding the forward operations

    Returns:
        Gradient map keyed by tensor

    Raises:
        ContractError: If ``loss`` is not a scalar
        TapeStateError: If the tape was already consumed
    """
    if loss.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if tape.consumed:
        raise TapeStateError("Tape was already consumed by backward(); record a new one")

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for record in tape._mark_consumed():
        upstream = grads.get(id(record.output))
        if upstream is None:
            continue
        for tensor, grad in zip(record.inputs, record.vjp(upstream)):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
    logger.debug(f"Backward pass over {len(tape)} recorded operations")
    return Gradients(grads, tape)
