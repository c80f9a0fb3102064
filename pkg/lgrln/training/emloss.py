"""Biased cross-entropy over multiple annotators.

The annotations of one video are treated as a mixture of Bernoulli
strategies. The E-step ranks annotators by how well the current predictions
explain them and gives the best ``subset_size`` of them the larger raw weight
``b`` (the rest get ``a``); the M-step minimizes the q-weighted cross-entropy.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from lgrln.config.config import LossConfig, LossMode
from lgrln.errors import ConfigurationError, DimensionError
from lgrln.numerics import ops
from lgrln.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

DEFAULT_EPS = 1e-7

Probabilities = Union[Tensor, np.ndarray]


@dataclass(frozen=True)
class AnnotationSet:
    """Binary keyshot labels of m annotators over n frames."""

    labels: np.ndarray
    importance: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.shape[0] < 1:
            raise DimensionError(f"labels must be an m x n matrix with m >= 1, got {labels.shape}")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must contain only 0 and 1")
        if self.importance is not None and np.shape(self.importance) != labels.shape:
            raise DimensionError(
                f"importance shape {np.shape(self.importance)} differs from labels {labels.shape}"
            )

    @property
    def n_annotators(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.labels.shape[1])


@dataclass(frozen=True)
class MixtureWeights:
    """E-step output: annotator weights ``q`` and the preferred subset."""

    q: np.ndarray
    subset: Tuple[int, ...]


def _as_array(p: Probabilities) -> np.ndarray:
    return p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)


def annotation_logliks(p: Probabilities, labels: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Bernoulli log-likelihood of every annotation row under ``p``."""
    probs = np.clip(_as_array(p), eps, 1.0 - eps)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.ndim == 1:
        labels = labels[None, :]
    if labels.shape[1] != probs.shape[0]:
        raise DimensionError(f"{probs.shape[0]} probabilities but annotations have {labels.shape[1]} frames")
    return labels @ np.log(probs) + (1.0 - labels) @ np.log1p(-probs)


def annotation_loglik(p: Probabilities, y: np.ndarray, eps: float = DEFAULT_EPS) -> float:
    """``sum_i y_i log p_i + (1 - y_i) log(1 - p_i)`` with clamped ``p``."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise DimensionError(f"Expected one annotation vector, got shape {y.shape}")
    return float(annotation_logliks(p, y, eps)[0])


def e_step(p: Probabilities, annotations: AnnotationSet, cfg: LossConfig) -> MixtureWeights:
    """Pick the best-explained annotators and weight them up.

    Ties in log-likelihood go to the lower annotator index.

    Raises:
        ConfigurationError: If ``subset_size`` exceeds the annotator count
    """
    m = annotations.n_annotators
    if cfg.subset_size > m:
        raise ConfigurationError(f"loss.subset_size={cfg.subset_size} exceeds {m} annotators")
    ll = annotation_logliks(p, annotations.labels, cfg.eps)
    order = np.lexsort((np.arange(m), -ll))
    subset = tuple(sorted(int(k) for k in order[: cfg.subset_size]))
    raw = np.full(m, cfg.a, dtype=np.float64)
    raw[list(subset)] = cfg.b
    q = raw / raw.sum()
    logger.debug(f"E-step subset {subset} with q={np.round(q, 4).tolist()}")
    return MixtureWeights(q=q, subset=subset)


def _clamped(p: Tensor, eps: float) -> Tensor:
    if p.ndim != 1:
        raise DimensionError(f"Expected a probability vector, got shape {p.shape}")
    return ops.clamp(p, eps, 1.0 - eps)


def biased_bce(p: Tensor, annotations: AnnotationSet, mixture: MixtureWeights, eps: float = DEFAULT_EPS) -> Tensor:
    """``-sum_k q(k) * loglik(p, y_k)``; ``q`` is a constant of the step."""
    clamped = _clamped(p, eps)
    n = clamped.shape[0]
    if annotations.n_frames != n:
        raise DimensionError(f"{n} probabilities but annotations have {annotations.n_frames} frames")
    labels = annotations.labels.astype(np.float64)
    log_p = ops.reshape(ops.log(clamped), (n, 1))
    log_q = ops.reshape(ops.log(1.0 - clamped), (n, 1))
    logliks = Tensor(labels) @ log_p + Tensor(1.0 - labels) @ log_q
    weights = Tensor(np.asarray(mixture.q, dtype=np.float64).reshape(1, -1))
    return ops.reshape(-(weights @ logliks), ())


def soft_label(annotations: AnnotationSet, mixture: MixtureWeights) -> np.ndarray:
    """Weighted label average ``sum_k q(k) y_k``."""
    return np.asarray(mixture.q) @ annotations.labels.astype(np.float64)


def mean_label(annotations: AnnotationSet) -> np.ndarray:
    """Uniform label average over annotators."""
    return annotations.labels.astype(np.float64).mean(axis=0)


def soft_label_bce(p: Tensor, target: np.ndarray, eps: float = DEFAULT_EPS) -> Tensor:
    """Cross-entropy of ``p`` against a soft target vector."""
    clamped = _clamped(p, eps)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != clamped.shape:
        raise DimensionError(f"target shape {target.shape} differs from probabilities {clamped.shape}")
    return -ops.sum(target * ops.log(clamped) + (1.0 - target) * ops.log(1.0 - clamped))


def mean_label_bce(p: Tensor, annotations: AnnotationSet, eps: float = DEFAULT_EPS) -> Tensor:
    """Cross-entropy against the arithmetic mean of the annotations."""
    return soft_label_bce(p, mean_label(annotations), eps)


def video_loss(p: Tensor, annotations: AnnotationSet, cfg: LossConfig) -> Tuple[Tensor, Optional[MixtureWeights]]:
    """Training objective for one video under the configured loss mode."""
    if cfg.mode == LossMode.MEAN:
        return mean_label_bce(p, annotations, cfg.eps), None
    mixture = e_step(p, annotations, cfg)
    return biased_bce(p, annotations, mixture, cfg.eps), mixture
