"""AdamW with decoupled weight decay over named numpy parameters."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from lgrln.errors import ConfigurationError, NumericFailure
from lgrln.numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """First/second moment accumulators and the shared step counter."""

    step: int = 0
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)


class AdamW:
    """Adam with weight decay applied directly to the parameters.

        m_t = b1 * m_{t-1} + (1 - b1) * g_t
        v_t = b2 * v_{t-1} + (1 - b2) * g_t^2
        theta_t = theta_{t-1} * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)

    A learning rate of zero leaves every parameter untouched.
    """

    def __init__(
        self,
        parameters: Mapping[str, Tensor],
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if lr < 0.0:
            raise ConfigurationError(f"Invalid learning rate: {lr}")
        if len(betas) != 2 or not all(0.0 <= beta < 1.0 for beta in betas):
            raise ConfigurationError(f"Invalid betas: {betas}")
        if eps < 0.0:
            raise ConfigurationError(f"Invalid epsilon: {eps}")
        if weight_decay < 0.0:
            raise ConfigurationError(f"Invalid weight decay: {weight_decay}")

        self.parameters = dict(parameters)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = OptimizerState(
            exp_avg={name: np.zeros_like(p.data) for name, p in self.parameters.items()},
            exp_avg_sq={name: np.zeros_like(p.data) for name, p in self.parameters.items()},
        )

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        """Apply one update.

        Args:
            grads: Gradient arrays keyed like ``parameters``; missing names
                count as zero gradients

        Raises:
            NumericFailure: If a moment becomes non-finite
        """
        self.state.step += 1
        t = self.state.step
        bias_correction1 = 1.0 - self.beta1**t
        bias_correction2 = 1.0 - self.beta2**t

        for name, param in self.parameters.items():
            grad = grads.get(name)
            if grad is None:
                grad = np.zeros_like(param.data)

            exp_avg = self.beta1 * self.state.exp_avg[name] + (1.0 - self.beta1) * grad
            exp_avg_sq = self.beta2 * self.state.exp_avg_sq[name] + (1.0 - self.beta2) * grad * grad
            if not (np.isfinite(exp_avg).all() and np.isfinite(exp_avg_sq).all()):
                raise NumericFailure(f"Non-finite optimizer moments for {name} at step {t}")
            self.state.exp_avg[name] = exp_avg
            self.state.exp_avg_sq[name] = exp_avg_sq

            if self.lr == 0.0:
                continue
            m_hat = exp_avg / bias_correction1
            v_hat = exp_avg_sq / bias_correction2
            decayed = param.data * (1.0 - self.lr * self.weight_decay)
            param.data = decayed - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

        logger.debug(f"AdamW step {t} over {len(self.parameters)} parameters")
