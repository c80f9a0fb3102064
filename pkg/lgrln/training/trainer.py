"""Training loop, evaluation and inference."""

import functools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel

from lgrln.config.config import TrainConfig
from lgrln.errors import CheckpointError, ConfigurationError, DimensionError, NumericFailure
from lgrln.evaluation.metrics import MetricSummary, VideoMetrics, aggregate_metrics, evaluate_video
from lgrln.model.graphs import VideoGraphs, build_graphs
from lgrln.model.network import NetworkOutput, SummarizationNetwork
from lgrln.numerics.tensor import GradTape, backward
from lgrln.persistence.dataset import Dataset, Video
from lgrln.summary.kts import ShotSegmentation, segment_video
from lgrln.summary.summarize import SummarySelection, summarize
from lgrln.training.emloss import video_loss
from lgrln.training.optimizer import AdamW

logger = logging.getLogger(__name__)


class EpochRow(BaseModel):
    """One JSON-lines training log row."""

    epoch: int
    split: str
    train_loss: Optional[float] = None
    val_loss: Optional[float] = None
    f1_max: float
    f1_mean: float


@dataclass
class TrainResult:
    """Trained network and its per-epoch log."""

    network: SummarizationNetwork
    rows: List[EpochRow] = field(default_factory=list)


@dataclass
class InferenceResult:
    """Frame probabilities and the summary built from them."""

    probabilities: np.ndarray
    branch_probabilities: Dict[str, np.ndarray]
    segmentation: ShotSegmentation
    selection: SummarySelection


@functools.lru_cache(maxsize=256)
def _uniform_graphs(n_frames: int, fps: float, tau: float) -> VideoGraphs:
    return build_graphs(n_frames, fps, tau)


def graphs_for(n_frames: int, fps: float, tau: float, timestamps: Optional[np.ndarray] = None) -> VideoGraphs:
    """Temporal graphs for a video; uniform-rate graphs are cached by size."""
    if timestamps is not None:
        return build_graphs(n_frames, fps, tau, timestamps)
    return _uniform_graphs(n_frames, float(fps), float(tau))


def _video_graphs(video: Video, config: TrainConfig) -> VideoGraphs:
    return graphs_for(video.n_frames, video.fps, config.tau, video.timestamps)


def _forward(
    network: SummarizationNetwork,
    video: Video,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> NetworkOutput:
    return network.forward(
        video.features, _video_graphs(video, network.config), video.tokens, training=training, rng=rng
    )


class _Evaluator:
    """Eval-mode loss and F1 over a fixed set of videos; segmentations are reused."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self._segments: Dict[str, ShotSegmentation] = {}

    def segmentation(self, video: Video) -> ShotSegmentation:
        if video.id not in self._segments:
            self._segments[video.id] = segment_video(video.features, self.config.summary, video.change_points)
        return self._segments[video.id]

    def run(self, network: SummarizationNetwork, dataset: Dataset) -> Dict[str, float]:
        losses, f1_max, f1_mean = [], [], []
        for video in dataset:
            out = _forward(network, video)
            loss, _ = video_loss(out.probabilities, video.annotations, self.config.loss)
            losses.append(loss.item() / video.n_frames)
            selection = summarize(out.probabilities.data, self.segmentation(video), self.config.budget_ratio)
            metrics = evaluate_video(video.id, out.probabilities.data, selection.frame_mask, video.annotations.labels)
            f1_max.append(metrics.f1_max)
            f1_mean.append(metrics.f1_mean)
        return {
            "loss": float(np.mean(losses)),
            "f1_max": float(np.mean(f1_max)),
            "f1_mean": float(np.mean(f1_mean)),
        }


def train_step(
    network: SummarizationNetwork,
    optimizer: AdamW,
    video: Video,
    epoch: int,
    rng: np.random.Generator,
) -> float:
    """One optimization step on one video; returns the loss value.

    Raises:
        NumericFailure: If the loss is not finite
    """
    params = network.parameters()
    with GradTape() as tape:
        out = _forward(network, video, training=True, rng=rng)
        loss, _ = video_loss(out.probabilities, video.annotations, network.config.loss)
    value = loss.item()
    if not math.isfinite(value):
        raise NumericFailure(
            f"Non-finite loss {value} on video {video.id} at epoch {epoch}",
            video_id=video.id,
            epoch=epoch,
        )
    grads = backward(loss, tape)
    optimizer.step({name: grads[t] for name, t in params.items()})
    return value


def train(
    dataset: Dataset,
    config: TrainConfig,
    val_dataset: Optional[Dataset] = None,
    log_path: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """Train a network with one step per video per epoch.

    After each epoch the network is evaluated with dropout off on the
    training videos (and on ``val_dataset`` if given). ``train_loss`` is
    that eval-mode objective per frame, averaged over videos.

    Args:
        dataset: Training videos (non-empty)
        config: Training configuration
        val_dataset: Optional held-out videos
        log_path: JSON-lines file receiving one row per epoch and split

    Returns:
        The trained network and its log rows

    Raises:
        ConfigurationError: If the dataset is empty
        NumericFailure: If a loss becomes non-finite
    """
    if len(dataset) == 0:
        raise ConfigurationError("Training needs at least one video")

    network = SummarizationNetwork(config, dataset.feature_dim, dataset.token_dim)
    optimizer = AdamW(
        network.parameters(),
        lr=config.learning_rate,
        betas=config.betas,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed)
    train_eval = _Evaluator(config)
    val_eval = _Evaluator(config)
    result = TrainResult(network=network)

    log_file = None
    if log_path is not None:
        log_path = Path(log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_file = open(log_path, "w")
    try:
        for epoch in range(1, config.epochs + 1):
            for index in rng.permutation(len(dataset)):
                train_step(network, optimizer, dataset.videos[int(index)], epoch, rng)

            stats = train_eval.run(network, dataset)
            rows = [
                EpochRow(
                    epoch=epoch,
                    split="train",
                    train_loss=stats["loss"],
                    f1_max=stats["f1_max"],
                    f1_mean=stats["f1_mean"],
                )
            ]
            if val_dataset is not None and len(val_dataset):
                val = val_eval.run(network, val_dataset)
                rows.append(
                    EpochRow(
                        epoch=epoch,
                        split="val",
                        train_loss=stats["loss"],
                        val_loss=val["loss"],
                        f1_max=val["f1_max"],
                        f1_mean=val["f1_mean"],
                    )
                )
            for row in rows:
                result.rows.append(row)
                if log_file is not None:
                    log_file.write(json.dumps(row.model_dump()) + "\n")
                    log_file.flush()
            logger.info(f"Epoch {epoch}/{config.epochs}: train_loss={stats['loss']:.5f} f1_max={stats['f1_max']:.4f}")
    finally:
        if log_file is not None:
            log_file.close()
    return result


def infer(
    network: SummarizationNetwork,
    features: np.ndarray,
    fps: float,
    tokens: Optional[np.ndarray] = None,
    timestamps: Optional[np.ndarray] = None,
    change_points: Optional[List[int]] = None,
) -> InferenceResult:
    """Score a video with dropout off and build its summary.

    Raises:
        CheckpointError: If the features or tokens do not match the network
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != network.input_dim:
        raise CheckpointError(f"Checkpoint expects {network.input_dim}-dim features, got shape {features.shape}")
    if tokens is not None and np.asarray(tokens).shape[0] > 0:
        if network.token_dim is None or np.asarray(tokens).shape[1] != network.token_dim:
            raise CheckpointError(f"Checkpoint token_dim {network.token_dim} does not fit query {np.shape(tokens)}")

    graphs = graphs_for(features.shape[0], fps, network.config.tau, timestamps)
    try:
        out = network.forward(features, graphs, tokens, training=False)
    except DimensionError as e:
        raise CheckpointError(str(e)) from e
    probabilities = out.probabilities.data
    segmentation = segment_video(features, network.config.summary, change_points)
    selection = summarize(probabilities, segmentation, network.config.budget_ratio)
    return InferenceResult(probabilities, out.branch_probabilities, segmentation, selection)


def evaluate(network: SummarizationNetwork, dataset: Dataset) -> List[VideoMetrics]:
    """Per-video F1 and correlation metrics."""
    rows = []
    for video in dataset:
        result = infer(network, video.features, video.fps, video.tokens, video.timestamps, video.change_points)
        rows.append(
            evaluate_video(
                video.id,
                result.probabilities,
                result.selection.frame_mask,
                video.annotations.labels,
                video.annotations.importance,
            )
        )
    return rows


def evaluate_summary(network: SummarizationNetwork, dataset: Dataset) -> MetricSummary:
    """Dataset averages of :func:`evaluate`."""
    return aggregate_metrics(evaluate(network, dataset))
