"""K-fold cross-validation."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from lgrln.config.config import TrainConfig
from lgrln.errors import ConfigurationError
from lgrln.evaluation.metrics import MetricSummary, VideoMetrics, aggregate_metrics
from lgrln.persistence.dataset import Dataset
from lgrln.training.trainer import evaluate, train

logger = logging.getLogger(__name__)


@dataclass
class FoldResult:
    """Held-out metrics of one fold."""

    fold: int
    test_ids: List[str]
    videos: List[VideoMetrics]
    summary: MetricSummary


@dataclass
class CrossValResult:
    """Per-fold results and their mean."""

    folds: List[FoldResult] = field(default_factory=list)

    @property
    def mean(self) -> MetricSummary:
        summaries = [f.summary for f in self.folds]
        taus = [s.tau for s in summaries if s.tau is not None]
        rhos = [s.rho for s in summaries if s.rho is not None]
        return MetricSummary(
            f1_max=float(np.mean([s.f1_max for s in summaries])),
            f1_mean=float(np.mean([s.f1_mean for s in summaries])),
            tau=float(np.mean(taus)) if taus else None,
            rho=float(np.mean(rhos)) if rhos else None,
        )


def fold_assignment(video_ids: Sequence[str], folds: int, seed: int) -> List[List[str]]:
    """Split ids into ``folds`` groups whose sizes differ by at most one.

    Depends only on the seed and the set of ids, not on their order.

    Raises:
        ConfigurationError: If there are fewer videos than folds
    """
    ids = sorted(video_ids)
    if folds > len(ids):
        raise ConfigurationError(f"folds={folds} exceeds the {len(ids)} videos in the dataset")
    order = np.random.default_rng(seed).permutation(len(ids))
    groups: List[List[str]] = [[] for _ in range(folds)]
    for position, index in enumerate(order):
        groups[position % folds].append(ids[int(index)])
    return groups


def run_fold(dataset: Dataset, config: TrainConfig, fold: int, test_ids: List[str]) -> FoldResult:
    """Train on everything outside ``test_ids`` and evaluate on them."""
    held_out = set(test_ids)
    train_ids = [i for i in dataset.ids() if i not in held_out]
    logger.info(f"Fold {fold}: {len(train_ids)} train / {len(test_ids)} test videos")
    result = train(dataset.subset(train_ids), config)
    rows = evaluate(result.network, dataset.subset(test_ids))
    return FoldResult(fold=fold, test_ids=list(test_ids), videos=rows, summary=aggregate_metrics(rows))


def crossval(dataset: Dataset, config: TrainConfig, workers: Optional[int] = None) -> CrossValResult:
    """Cross-validate: each fold trains its own network from the same seed.

    Folds run on a thread pool when ``workers`` (default ``config.workers``)
    is above one; results come back in fold order either way.
    """
    groups = fold_assignment(dataset.ids(), config.folds, config.seed)
    workers = config.workers if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda item: run_fold(dataset, config, *item), enumerate(groups)))
    else:
        results = [run_fold(dataset, config, fold, ids) for fold, ids in enumerate(groups)]
    outcome = CrossValResult(folds=results)
    logger.info(f"Cross-validation mean: {outcome.mean.as_dict()}")
    return outcome
