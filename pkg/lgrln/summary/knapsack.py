"""Exact 0/1 knapsack over shots."""

import logging
from typing import List, Sequence

import numpy as np

from lgrln.errors import ContractError

logger = logging.getLogger(__name__)

_TIE_TOL = 1e-12


def knapsack_table(values: np.ndarray, weights: np.ndarray, capacity: int) -> np.ndarray:
    """``best[i, c]``: top value from items ``i..`` with capacity ``c``."""
    n = len(values)
    best = np.zeros((n + 1, capacity + 1))
    for i in range(n - 1, -1, -1):
        best[i] = best[i + 1]
        w = int(weights[i])
        if w <= capacity:
            take = values[i] + best[i + 1, : capacity + 1 - w]
            best[i, w:] = np.maximum(best[i + 1, w:], take)
    return best


def knapsack_select(shot_scores: Sequence[float], shot_lengths: Sequence[int], budget_frames: int) -> List[int]:
    """Indices of the shots maximizing total score within the frame budget.

    Among optimal sets the one taking the earliest possible shot wins.

    Raises:
        ContractError: If the budget is negative, lengths are not positive
            integers, or the inputs disagree in length
    """
    values = np.asarray(shot_scores, dtype=np.float64)
    weights = np.asarray(shot_lengths)
    if values.shape != weights.shape or values.ndim != 1:
        raise ContractError(f"{values.shape} scores but {weights.shape} lengths")
    if budget_frames < 0:
        raise ContractError(f"budget must be >= 0, got {budget_frames}")
    if weights.size and (np.any(weights <= 0) or not np.all(np.equal(np.mod(weights, 1), 0))):
        raise ContractError("shot lengths must be positive integers")
    weights = weights.astype(np.int64)

    capacity = int(budget_frames)
    best = knapsack_table(values, weights, capacity)
    selected: List[int] = []
    c = capacity
    for i in range(len(values)):
        w = int(weights[i])
        if w > c:
            continue
        take = values[i] + best[i + 1, c - w]
        skip = best[i + 1, c]
        if take >= skip - _TIE_TOL * max(1.0, abs(skip)):
            selected.append(i)
            c -= w
    logger.debug(f"Knapsack picked {len(selected)} of {len(values)} shots, {capacity - c}/{capacity} frames")
    return selected
