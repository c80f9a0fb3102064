"""CSV plot data: loss curves, time-embedding correlations, branch scores."""

import csv
import logging
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

LOSS_CURVE = "loss_curve.csv"
TIME_EMBEDDING_CORRELATION = "time_embedding_correlation.csv"
BRANCH_SCORES = "branch_scores.csv"


def _fmt(value: object) -> str:
    return "" if value is None else str(value)


def write_loss_curve(rows: Sequence[object], out_dir: Union[str, Path]) -> Path:
    """One line per (epoch, split) with train and validation loss."""
    path = Path(out_dir) / LOSS_CURVE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "split", "train_loss", "val_loss"])
        for row in rows:
            writer.writerow([row.epoch, row.split, _fmt(row.train_loss), _fmt(row.val_loss)])
    logger.info(f"Wrote loss curve to {path}")
    return path


def write_matrix(matrix: np.ndarray, path: Union[str, Path]) -> Path:
    """Dense matrix, one CSV row per matrix row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        csv.writer(f).writerows(np.asarray(matrix).tolist())
    return path


def write_time_embedding_correlation(correlation: np.ndarray, out_dir: Union[str, Path]) -> Path:
    path = write_matrix(correlation, Path(out_dir) / TIME_EMBEDDING_CORRELATION)
    logger.info(f"Wrote time embedding correlation ({correlation.shape[0]} positions) to {path}")
    return path


def write_branch_scores(
    probabilities: np.ndarray,
    branch_probabilities: Dict[str, np.ndarray],
    out_dir: Union[str, Path],
) -> Path:
    """Per-frame fused probability next to each branch's own probability."""
    path = Path(out_dir) / BRANCH_SCORES
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(branch_probabilities)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "fused", *names])
        for i, p in enumerate(probabilities):
            writer.writerow([i, float(p), *(float(branch_probabilities[n][i]) for n in names)])
    logger.info(f"Wrote branch scores to {path}")
    return path
