"""Central finite-difference gradient checking."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence

import numpy as np

from lgrln.numerics.tensor import GradTape, Tensor, backward

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


@dataclass
class GradCheckResult:
    """Outcome of one gradient comparison."""

    max_error: float
    errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest ``|analytic - numeric| / max(1, |numeric|)`` over entries."""
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))))


def numerical_gradient(
    fn: Callable[[], Tensor], tensor: Tensor, step: float = DEFAULT_STEP
) -> np.ndarray:
    """Central differences of a scalar function with respect to ``tensor``.

    ``tensor.data`` is perturbed in place and restored afterwards.
    """
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = fn().item()
        flat[i] = original - step
        minus = fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(
    fn: Callable[[], Tensor],
    wrt: Sequence[Tensor],
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
) -> GradCheckResult:
    """Compare tape gradients of a scalar function against finite differences.

    Args:
        fn: Rebuilds the scalar output from the current tensor values
        wrt: Tensors to differentiate; each must have ``requires_grad``
        step: Finite-difference step
        tolerance: Pass threshold on the relative error

    Returns:
        Per-tensor and overall relative errors
    """
    with GradTape() as tape:
        out = fn()
    grads = backward(out, tape)

    errors: Dict[str, float] = {}
    for i, tensor in enumerate(wrt):
        label = tensor.name or f"arg{i}"
        errors[label] = relative_error(grads[tensor], numerical_gradient(fn, tensor, step))
    max_error = max(errors.values(), default=0.0)
    logger.debug(f"Gradient check max relative error {max_error:.3e}")
    return GradCheckResult(max_error=max_error, errors=errors, tolerance=tolerance)
