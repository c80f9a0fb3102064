"""Key-shot summaries from per-frame probabilities."""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from lgrln.errors import ConfigurationError, DimensionError
from lgrln.summary.kts import ShotSegmentation
from lgrln.summary.knapsack import knapsack_select

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SummarySelection:
    """Per-shot scores and the selected frames."""

    shot_scores: np.ndarray
    shot_lengths: np.ndarray
    selected: np.ndarray
    frame_mask: np.ndarray

    @property
    def selected_shots(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.selected)]


def budget_frames(n_frames: int, budget_ratio: float) -> int:
    """``floor(budget_ratio * n_frames)``, robust to float round-off."""
    return int(math.floor(round(budget_ratio * n_frames, 9)))


def summarize(p: np.ndarray, seg: ShotSegmentation, budget_ratio: float) -> SummarySelection:
    """Score shots by mean probability and pick them under the length budget.

    Raises:
        ConfigurationError: If ``budget_ratio`` is outside (0, 1]
        DimensionError: If ``p`` does not cover the segmentation
    """
    if not 0.0 < budget_ratio <= 1.0:
        raise ConfigurationError(f"budget_ratio must be in (0, 1], got {budget_ratio}")
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (seg.n_frames,):
        raise DimensionError(f"{p.shape[0]} probabilities for {seg.n_frames} frames")

    segments = seg.segments()
    scores = np.array([p[start:end].mean() for start, end in segments])
    lengths = seg.lengths()
    chosen = knapsack_select(scores, lengths, budget_frames(seg.n_frames, budget_ratio))

    selected = np.zeros(len(segments), dtype=bool)
    selected[chosen] = True
    mask = np.zeros(seg.n_frames, dtype=bool)
    for i in chosen:
        start, end = segments[i]
        mask[start:end] = True
    return SummarySelection(scores, lengths, selected, mask)


def run_length_encode(mask: np.ndarray) -> List[Tuple[int, int]]:
    """``[(value, run_length), ...]`` for a boolean mask."""
    mask = np.asarray(mask).astype(np.int64)
    if mask.size == 0:
        return []
    starts = np.flatnonzero(np.diff(mask)) + 1
    bounds = np.concatenate([[0], starts, [mask.size]])
    return [(int(mask[a]), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:])]
