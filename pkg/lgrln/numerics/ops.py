"""Differentiable tensor operations.

Each operation computes its forward value with numpy and hands
:func:`apply_op` a vector-Jacobian product closure over the values it needs.
Binary elementwise operations broadcast like numpy and sum gradients back to
the operand shape.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse, special

from lgrln.errors import DimensionError
from lgrln.numerics.tensor import DTYPE, Tensor, TensorLike, apply_op

EPS_NORM = 1e-12
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715


def as_tensor(x: TensorLike) -> Tensor:
    """Return ``x`` unchanged if it is a tensor, else a constant tensor."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return apply_op(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return apply_op(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return apply_op(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.data / b.data
    return apply_op(
        "div",
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        ),
    )


def neg(a: TensorLike) -> Tensor:
    a = as_tensor(a)
    return apply_op("neg", -a.data, (a,), lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-D tensors.

    Raises:
        DimensionError: If the operands are not 2-D or inner extents differ
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return apply_op(
        "matmul",
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def transpose(a: Tensor) -> Tensor:
    return apply_op("transpose", a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    old = a.shape
    try:
        out = a.data.reshape(tuple(shape))
    except ValueError as e:
        raise DimensionError(f"reshape: cannot view {old} as {tuple(shape)}") from e
    return apply_op("reshape", out, (a,), lambda g: (g.reshape(old),))


def sum(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return apply_op("sum", a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def mean(a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else a.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return apply_op("sqrt", out, (a,), lambda g: (g * 0.5 / out,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return apply_op("exp", out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return apply_op("log", np.log(a.data), (a,), lambda g: (g / a.data,))


def clamp(a: Tensor, low: float, high: float) -> Tensor:
    """Clip values into ``[low, high]``; gradient is zero where clipped."""
    inside = (a.data >= low) & (a.data <= high)
    return apply_op("clamp", np.clip(a.data, low, high), (a,), lambda g: (g * inside,))


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_C * x * (1.0 + _GELU_K * x2))
    out = 0.5 * x * (1.0 + t)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3.0 * _GELU_K * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * dt),)

    return apply_op("gelu", out, (a,), vjp)


def sigmoid(a: Tensor) -> Tensor:
    out = special.expit(a.data)
    return apply_op("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with max subtraction."""
    out = special.softmax(a.data, axis=axis)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return apply_op("softmax", out, (a,), vjp)


def take_rows(table: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows ``table[index]``; repeated rows accumulate gradient."""
    index = np.asarray(index, dtype=np.int64)

    def vjp(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros_like(table.data)
        np.add.at(grad, index, g)
        return (grad,)

    return apply_op("take_rows", table.data[index], (table,), vjp)


def sparse_matmul(matrix: sparse.csr_matrix, a: Tensor) -> Tensor:
    """Product of a constant sparse matrix with a dense tensor."""
    if matrix.shape[1] != a.shape[0]:
        raise DimensionError(f"sparse_matmul: cannot multiply {matrix.shape} by {a.shape}")
    return apply_op(
        "sparse_matmul",
        np.asarray(matrix @ a.data, dtype=DTYPE),
        (a,),
        lambda g: (np.asarray(matrix.T @ g, dtype=DTYPE),),
    )


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: surviving entries are scaled by ``1 / (1 - rate)``."""
    if rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, keep)


def cosine(u: TensorLike, v: TensorLike) -> float:
    """Cosine similarity of two vectors; 0 when either norm is below 1e-12.

    Raises:
        DimensionError: If the vectors differ in extent
    """
    u_arr = np.ravel(as_tensor(u).data)
    v_arr = np.ravel(as_tensor(v).data)
    if u_arr.shape != v_arr.shape or u_arr.size == 0:
        raise DimensionError(f"cosine: extents {u_arr.shape} and {v_arr.shape} differ")
    nu, nv = np.linalg.norm(u_arr), np.linalg.norm(v_arr)
    if nu < EPS_NORM or nv < EPS_NORM:
        return 0.0
    return float(np.clip(u_arr @ v_arr / (nu * nv), -1.0, 1.0))


def row_cosines(h: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Cosine between ``h[rows[k]]`` and ``h[cols[k]]`` for every k.

    Pairs involving a near-zero row get similarity 0.
    """
    norms = np.linalg.norm(h, axis=1)
    dots = np.einsum("ij,ij->i", h[rows], h[cols])
    denom = norms[rows] * norms[cols]
    valid = (norms[rows] >= EPS_NORM) & (norms[cols] >= EPS_NORM)
    out = np.zeros(rows.shape[0], dtype=DTYPE)
    np.divide(dots, denom, out=out, where=valid)
    return np.clip(out, -1.0, 1.0)
