"""Summary quality metrics: keyshot F1 and rank correlations."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import stats

from lgrln.errors import DimensionError, UndefinedCorrelationError

logger = logging.getLogger(__name__)


def f1(pred_mask: np.ndarray, gt_mask: np.ndarray) -> Tuple[float, float, float]:
    """Precision, recall and F1 of a predicted frame mask.

    An empty prediction has precision 0, an empty ground truth recall 0, and
    F1 is 0 when both are 0.
    """
    pred = np.asarray(pred_mask).astype(bool)
    gt = np.asarray(gt_mask).astype(bool)
    if pred.shape != gt.shape:
        raise DimensionError(f"Mask lengths differ: {pred.shape} vs {gt.shape}")
    overlap = float(np.count_nonzero(pred & gt))
    n_pred = np.count_nonzero(pred)
    n_gt = np.count_nonzero(gt)
    precision = overlap / n_pred if n_pred else 0.0
    recall = overlap / n_gt if n_gt else 0.0
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def f1_multi(pred_mask: np.ndarray, annotations: np.ndarray) -> Tuple[float, float]:
    """Maximum and mean F1 over the annotators' masks."""
    annotations = np.atleast_2d(np.asarray(annotations))
    if annotations.shape[0] < 1:
        raise DimensionError("f1_multi needs at least one annotation")
    scores = [f1(pred_mask, gt)[2] for gt in annotations]
    return float(max(scores)), float(np.mean(scores))


def _check_pair(x: Sequence[float], y: Sequence[float], name: str) -> Tuple[np.ndarray, np.ndarray]:
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if x_arr.ndim != 1 or x_arr.shape != y_arr.shape:
        raise DimensionError(f"{name}: vectors of shapes {x_arr.shape} and {y_arr.shape}")
    if x_arr.size < 2:
        raise DimensionError(f"{name}: needs at least 2 values, got {x_arr.size}")
    if np.ptp(x_arr) == 0.0 or np.ptp(y_arr) == 0.0:
        raise UndefinedCorrelationError(f"{name} is undefined for a constant vector")
    return x_arr, y_arr


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b."""
    x_arr, y_arr = _check_pair(x, y, "kendall_tau")
    return float(stats.kendalltau(x_arr, y_arr, variant="b").statistic)


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    x_arr, y_arr = _check_pair(x, y, "spearman_rho")
    return float(stats.spearmanr(x_arr, y_arr).statistic)


class VideoMetrics(BaseModel):
    """Evaluation row for one video."""

    video_id: str
    f1_max: float
    f1_mean: float
    tau: Optional[float] = None
    rho: Optional[float] = None


@dataclass
class MetricSummary:
    """Averages over a set of videos; correlations skip undefined entries."""

    f1_max: float
    f1_mean: float
    tau: Optional[float]
    rho: Optional[float]

    def as_dict(self) -> dict:
        return {"f1_max": self.f1_max, "f1_mean": self.f1_mean, "tau": self.tau, "rho": self.rho}


def evaluate_video(
    video_id: str,
    probabilities: np.ndarray,
    pred_mask: np.ndarray,
    labels: np.ndarray,
    importance: Optional[np.ndarray] = None,
) -> VideoMetrics:
    """F1 against every annotator, plus correlations with mean importance.

    Without importance scores the mean binary label stands in. Constant
    vectors give null correlations.
    """
    f1_max, f1_mean = f1_multi(pred_mask, labels)
    reference = np.mean(importance if importance is not None else labels, axis=0)
    tau: Optional[float] = None
    rho: Optional[float] = None
    try:
        tau = kendall_tau(probabilities, reference)
        rho = spearman_rho(probabilities, reference)
    except UndefinedCorrelationError as e:
        logger.warning(f"Skipping correlations for video {video_id}: {e}")
    except DimensionError as e:
        logger.warning(f"Skipping correlations for video {video_id}: {e}")
    return VideoMetrics(video_id=video_id, f1_max=f1_max, f1_mean=f1_mean, tau=tau, rho=rho)


def aggregate_metrics(rows: Sequence[VideoMetrics]) -> MetricSummary:
    """Per-video metrics averaged over videos."""
    if not rows:
        return MetricSummary(f1_max=0.0, f1_mean=0.0, tau=None, rho=None)
    taus = [r.tau for r in rows if r.tau is not None]
    rhos = [r.rho for r in rows if r.rho is not None]
    return MetricSummary(
        f1_max=float(np.mean([r.f1_max for r in rows])),
        f1_mean=float(np.mean([r.f1_mean for r in rows])),
        tau=float(np.mean(taus)) if taus else None,
        rho=float(np.mean(rhos)) if rhos else None,
    )
