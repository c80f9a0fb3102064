"""Tests for the training loop and inference."""

import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from lgrln.config.config import default_config
from lgrln.errors import CheckpointError, ConfigurationError, NumericFailure
from lgrln.model.network import SummarizationNetwork
from lgrln.persistence.dataset import Dataset, Video
from lgrln.persistence.synth import SynthOptions, synth_dataset
from lgrln.training.emloss import AnnotationSet
from lgrln.training.optimizer import AdamW
from lgrln.training.trainer import evaluate, evaluate_summary, infer, train, train_step


def _small_config(**overrides):
    values = {"epochs": 3, "gbt.hidden_dim": 16, "gbt.max_positions": 256}
    values.update(overrides)
    return default_config(**values)


def _small_dataset(**overrides) -> Dataset:
    values = dict(n_videos=3, n_frames_range=(30, 40), n_scenes=3, n_annotators=3, feature_dim=8)
    values.update(overrides)
    return synth_dataset(SynthOptions(**values))


def _blocky_video() -> Video:
    rng = np.random.default_rng(3)
    means = rng.normal(0.0, 1.0, size=(6, 8))
    features = np.repeat(means, 5, axis=0) + 0.05 * rng.normal(size=(30, 8))
    labels = np.zeros((1, 30), dtype=np.uint8)
    labels[0, 5:10] = 1
    labels[0, 20:25] = 1
    return Video(
        id="blocks",
        features=features,
        annotations=AnnotationSet(labels=labels),
        fps=2.0,
        change_points=[5, 10, 15, 20, 25],
    )


def test_zero_learning_rate_keeps_everything_fixed():
    """Test lr=0 leaves parameters and the per-epoch loss unchanged."""
    config = _small_config().model_copy(update={"learning_rate": 0.0})
    dataset = _small_dataset()
    initial = SummarizationNetwork(config, dataset.feature_dim).state_dict()
    result = train(dataset, config)

    final = result.network.state_dict()
    assert all(np.array_equal(initial[name], final[name]) for name in initial)
    losses = [row.train_loss for row in result.rows]
    assert losses == [losses[0]] * len(losses)


def test_short_training_lowers_loss():
    """Test the default synthetic set and config lower the loss at every epoch for most seeds."""
    dataset = synth_dataset(SynthOptions())
    monotone = 0
    for seed in range(10):
        result = train(dataset, default_config(epochs=5, seed=seed))
        losses = [row.train_loss for row in result.rows if row.split == "train"]
        assert len(losses) == 5
        if all(later < earlier for earlier, later in zip(losses, losses[1:])):
            monotone += 1
    assert monotone >= 9


def test_overfits_single_video():
    """Test one video with one annotator is fitted almost exactly."""
    video = _blocky_video()
    config = default_config(
        epochs=200,
        learning_rate=1e-2,
        weight_decay=0.0,
        **{"gbt.hidden_dim": 16, "gbt.dropout_rate": 0.0, "gbt.max_positions": 64, "summary.budget_ratio": 0.34},
    )
    result = train(Dataset(feature_dim=8, videos=[video]), config)
    assert result.rows[-1].train_loss < result.rows[0].train_loss
    assert result.rows[-1].f1_max >= 0.9

    inferred = infer(result.network, video.features, video.fps, change_points=video.change_points)
    assert inferred.selection.selected_shots == [1, 4]


def test_training_is_deterministic():
    """Test the same seed gives identical weights and logs."""
    dataset = _small_dataset()
    first = train(dataset, _small_config(seed=7))
    second = train(dataset, _small_config(seed=7))
    a, b = first.network.state_dict(), second.network.state_dict()
    assert all(np.array_equal(a[name], b[name]) for name in a)
    assert [r.model_dump() for r in first.rows] == [r.model_dump() for r in second.rows]


def test_train_log_rows():
    """Test one JSON line per epoch and split, with validation rows."""
    dataset = _small_dataset(n_videos=4)
    train_set, val_set = dataset.subset(dataset.ids()[:3]), dataset.subset(dataset.ids()[3:])
    with tempfile.TemporaryDirectory() as tmp:
        log_path = Path(tmp) / "logs" / "train_log.jsonl"
        result = train(train_set, _small_config(epochs=2), val_dataset=val_set, log_path=log_path)
        lines = [json.loads(line) for line in log_path.read_text().splitlines()]
    assert [(row["epoch"], row["split"]) for row in lines] == [(1, "train"), (1, "val"), (2, "train"), (2, "val")]
    assert lines == [row.model_dump() for row in result.rows]
    assert lines[0]["val_loss"] is None and lines[1]["val_loss"] is not None
    assert all(0.0 <= row["f1_mean"] <= row["f1_max"] <= 1.0 for row in lines)


def test_empty_dataset_rejected():
    """Test training needs videos."""
    with pytest.raises(ConfigurationError):
        train(Dataset(feature_dim=8), _small_config())


def test_non_finite_loss_raises():
    """Test a diverged network reports the video and epoch."""
    dataset = _small_dataset(n_videos=1)
    config = _small_config()
    network = SummarizationNetwork(config, dataset.feature_dim)
    network.parameters()["head.b"].data[...] = np.nan
    optimizer = AdamW(network.parameters())
    with pytest.raises(NumericFailure) as exc:
        train_step(network, optimizer, dataset.videos[0], 4, np.random.default_rng(0))
    assert exc.value.video_id == dataset.videos[0].id
    assert exc.value.epoch == 4


def test_inference_is_deterministic():
    """Test repeated inference gives bitwise-equal output."""
    dataset = _small_dataset(n_videos=1)
    network = SummarizationNetwork(_small_config(), dataset.feature_dim)
    video = dataset.videos[0]
    first = infer(network, video.features, video.fps)
    second = infer(network, video.features, video.fps)
    assert np.array_equal(first.probabilities, second.probabilities)
    assert first.selection.selected_shots == second.selection.selected_shots
    assert set(first.branch_probabilities) == {"forward", "backward", "undirected"}


def test_empty_query_matches_generic():
    """Test a zero-token query is the generic summary."""
    dataset = _small_dataset(n_videos=1, with_queries=True)
    video = dataset.videos[0]
    network = SummarizationNetwork(_small_config(), dataset.feature_dim, dataset.token_dim)
    generic = infer(network, video.features, video.fps)
    empty = infer(network, video.features, video.fps, np.zeros((0, dataset.token_dim)))
    guided = infer(network, video.features, video.fps, video.tokens)
    assert np.array_equal(generic.probabilities, empty.probabilities)
    assert not np.array_equal(generic.probabilities, guided.probabilities)


def test_inference_dimension_mismatch():
    """Test features or tokens of the wrong width raise CheckpointError."""
    network = SummarizationNetwork(_small_config(), 8)
    with pytest.raises(CheckpointError, match="8-dim"):
        infer(network, np.zeros((10, 5)), 2.0)
    with pytest.raises(CheckpointError):
        infer(network, np.zeros((10, 8)), 2.0, np.ones((2, 8)))


def test_inference_latency():
    """Test a 600-frame video is scored, segmented and summarized within 100 ms."""
    rng = np.random.default_rng(0)
    features = rng.normal(size=(600, 32))
    network = SummarizationNetwork(default_config(), 32)
    warm = infer(network, features, 2.0)
    assert warm.segmentation.n_frames == 600
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        infer(network, features, 2.0)
        best = min(best, time.perf_counter() - start)
    assert best < 0.1


def test_evaluate_rows():
    """Test per-video metric rows and their summary."""
    dataset = _small_dataset()
    network = SummarizationNetwork(_small_config(), dataset.feature_dim)
    rows = evaluate(network, dataset)
    assert [row.video_id for row in rows] == dataset.ids()
    summary = evaluate_summary(network, dataset)
    assert summary.f1_max == pytest.approx(np.mean([row.f1_max for row in rows]))
