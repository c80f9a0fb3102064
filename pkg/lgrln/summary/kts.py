"""Kernel temporal segmentation.

Change points minimize the total within-segment kernel scatter plus a
penalty growing with the number of segments. Scatters of every frame range
come from cumulative sums of the Gram matrix; the optimal placement for each
change-point count comes from dynamic programming.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from lgrln.config.config import KernelType, SummaryConfig
from lgrln.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)

DEFAULT_MAX_CHANGES = 20


@dataclass(frozen=True)
class ShotSegmentation:
    """Sorted segment starts (excluding 0) over ``n_frames`` frames."""

    change_points: Tuple[int, ...]
    n_frames: int

    def __post_init__(self) -> None:
        previous = 0
        for cp in self.change_points:
            if not previous < cp < self.n_frames:
                raise ValueError(
                    f"change points {self.change_points} must increase strictly inside (0, {self.n_frames})"
                )
            previous = cp

    @property
    def n_shots(self) -> int:
        return len(self.change_points) + 1

    def segments(self) -> List[Tuple[int, int]]:
        """Half-open ``(start, end)`` frame ranges of every shot."""
        bounds = [0, *self.change_points, self.n_frames]
        return list(zip(bounds[:-1], bounds[1:]))

    def lengths(self) -> np.ndarray:
        return np.diff(np.asarray([0, *self.change_points, self.n_frames], dtype=np.int64))


def kernel_matrix(
    features: np.ndarray, kernel: KernelType = KernelType.LINEAR, gamma: Optional[float] = None
) -> np.ndarray:
    """Gram matrix of the frame features.

    The RBF bandwidth defaults to ``1 / D``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"features must be n x D, got shape {x.shape}")
    if KernelType(kernel) is KernelType.LINEAR:
        return x @ x.T
    gamma = 1.0 / x.shape[1] if gamma is None else gamma
    if x.shape[0] == 1:
        return np.ones((1, 1))
    return np.exp(-gamma * squareform(pdist(x, metric="sqeuclidean")))


def _scatter_table(K: np.ndarray) -> np.ndarray:
    """Scatters indexed ``[end, start]`` over inclusive frame ranges (inf for end < start)."""
    n = K.shape[0]
    diag = np.concatenate([[0.0], np.cumsum(np.diag(K))])
    block = np.zeros((n + 1, n + 1))
    np.cumsum(np.cumsum(K, axis=0), axis=1, out=block[1:, 1:])
    corners = np.diagonal(block)

    lengths = np.subtract.outer(np.arange(1, n + 1), np.arange(n))
    within = corners[1:, None] + corners[None, :n] - block[1:, :n] - block[:n, 1:].T
    table = diag[1:, None] - diag[None, :n]
    table -= within / np.maximum(lengths, 1)
    table[lengths < 1] = np.inf
    return table


def segment_scatters(K: np.ndarray) -> np.ndarray:
    """``J[s, e]``: scatter of the inclusive frame range ``[s, e]`` (inf for e < s)."""
    return _scatter_table(K).T


def optimal_scatters(K: np.ndarray, max_changes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Best total scatter for every change-point count up to ``max_changes``.

    Returns:
        ``(costs, back)`` where ``costs[m]`` is the minimal total scatter with
        ``m`` change points and ``back`` holds the backtracking table
    """
    n = K.shape[0]
    table = _scatter_table(K)
    best = np.full((max_changes + 1, n + 1), np.inf)
    back = np.zeros((max_changes + 1, n + 1), dtype=np.int64)
    best[0, 1:] = table[:, 0]
    ends = np.arange(n)
    candidates = np.empty((n, n))
    for k in range(1, max_changes + 1):
        # candidates[e, t]: k-th change point at t, segment [t, e] closes the prefix
        np.add(table, best[k - 1, :n], out=candidates)
        back[k, 1:] = np.argmin(candidates, axis=1)
        best[k, 1:] = candidates[ends, back[k, 1:]]
    return best[:, n], back


def _backtrack(back: np.ndarray, n: int, m: int) -> Tuple[int, ...]:
    points = []
    end = n
    for k in range(m, 0, -1):
        end = int(back[k, end])
        points.append(end)
    return tuple(reversed(points))


def penalty(m: int, n: int, scale: float, penalty_coeff: float) -> float:
    """Model-size penalty for ``m`` change points (zero at ``m = 0``)."""
    if m == 0:
        return 0.0
    return penalty_coeff * scale * m * (math.log(n / m) + 1.0)


def kts_segment(
    features: np.ndarray,
    max_changes: int,
    penalty_coeff: float = 1.0,
    kernel: KernelType = KernelType.LINEAR,
    rbf_gamma: Optional[float] = None,
) -> ShotSegmentation:
    """Segment a video into shots.

    Args:
        features: n x D frame features
        max_changes: Largest change-point count considered (< n)
        penalty_coeff: Multiplier on the penalty, itself scaled by the mean
            diagonal of the kernel
        kernel: Linear or RBF kernel
        rbf_gamma: RBF bandwidth

    Returns:
        The penalized-optimal segmentation

    Raises:
        ConfigurationError: If ``max_changes`` is negative or not below n
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 1:
        raise DimensionError(f"features must be n x D with n >= 1, got {features.shape}")
    n = features.shape[0]
    if not 0 <= max_changes < n:
        raise ConfigurationError(f"max_changes={max_changes} must lie in [0, {n})")

    K = kernel_matrix(features, kernel, rbf_gamma)
    costs, back = optimal_scatters(K, max_changes)
    scale = float(np.mean(np.diag(K)))
    objective = [costs[m] + penalty(m, n, scale, penalty_coeff) for m in range(max_changes + 1)]
    m = int(np.argmin(objective))
    segmentation = ShotSegmentation(_backtrack(back, n, m), n)
    logger.debug(f"KTS picked {m} change points over {n} frames")
    return segmentation


def segment_video(
    features: np.ndarray,
    cfg: SummaryConfig,
    change_points: Optional[List[int]] = None,
) -> ShotSegmentation:
    """Segmentation under a summary config; given change points take priority when enabled."""
    n = int(np.shape(features)[0])
    if change_points is not None and cfg.use_dataset_change_points:
        return ShotSegmentation(tuple(int(c) for c in change_points), n)
    max_changes = cfg.max_changes
    if max_changes is None:
        max_changes = min(n - 1, DEFAULT_MAX_CHANGES)
    return kts_segment(features, max_changes, cfg.penalty_coeff, cfg.kernel, cfg.rbf_gamma)
