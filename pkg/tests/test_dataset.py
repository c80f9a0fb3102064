"""Tests for dataset manifests and the synthetic generator."""

import json
import tempfile
from pathlib import Path

import numpy as np
import pytest

from lgrln.errors import ConfigurationError, DatasetLoadError
from lgrln.numerics.blob import write_blob
from lgrln.persistence.dataset import Dataset, load_dataset, write_dataset
from lgrln.persistence.synth import SynthOptions, synth_dataset
from lgrln.summary.kts import kts_segment


def _small_options(**overrides) -> SynthOptions:
    values = dict(n_videos=3, n_frames_range=(30, 40), n_scenes=3, n_annotators=3, feature_dim=8)
    values.update(overrides)
    return SynthOptions(**values)


def _write_manifest(root: Path, **video_fields) -> Path:
    write_blob(root / "f.lgrt", np.zeros((4, 2)), "f8")
    write_blob(root / "a.lgrt", np.array([[0, 1, 1, 0]]), "u1")
    video = {"id": "clip", "n_frames": 4, "fps": 1.0, "features_blob": "f.lgrt", "annotations_blob": "a.lgrt"}
    video.update(video_fields)
    path = root / "manifest.json"
    path.write_text(json.dumps({"format": "lgrln-dataset", "version": 1, "feature_dim": 2, "videos": [video]}))
    return path


def test_empty_manifest_is_valid():
    """Test a manifest without videos loads."""
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "manifest.json"
        path.write_text(json.dumps({"feature_dim": 4, "videos": []}))
        dataset = load_dataset(tmp)
        assert len(dataset) == 0
        assert dataset.feature_dim == 4


def test_minimal_manifest():
    """Test one hand-written video."""
    with tempfile.TemporaryDirectory() as tmp:
        dataset = load_dataset(_write_manifest(Path(tmp), change_points=[2]))
        (video,) = dataset.videos
        assert video.id == "clip"
        assert video.n_frames == 4
        assert video.change_points == [2]
        assert video.annotations.labels.tolist() == [[0, 1, 1, 0]]
        assert video.tokens is None


def test_non_binary_annotation_rejected():
    """Test a label value of 2 names the video, path and field."""
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        path = _write_manifest(root)
        write_blob(root / "a.lgrt", np.array([[0, 2, 1, 0]]), "u1")
        with pytest.raises(DatasetLoadError, match="video clip") as exc:
            load_dataset(path)
        assert exc.value.field == "annotations_blob"
        assert exc.value.path.endswith("a.lgrt")


def test_unreadable_blobs_name_video_and_field():
    """Test a missing or corrupt blob reports the video id, blob path and manifest field."""
    cases = [
        ("features_blob", {"features_blob": "missing.lgrt"}, "missing.lgrt", "not found"),
        ("annotations_blob", {}, "a.lgrt", "Bad magic"),
        ("importance_blob", {"importance_blob": "gone.lgrt"}, "gone.lgrt", "not found"),
    ]
    for field, fields, blob, reason in cases:
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            path = _write_manifest(root, **fields)
            if field == "annotations_blob":
                (root / "a.lgrt").write_bytes(b"JUNKJUNKJUNK")
            with pytest.raises(DatasetLoadError, match=f"video clip: .*{reason}") as exc:
                load_dataset(path)
            assert exc.value.field == field
            assert exc.value.path.endswith(blob)


def test_invalid_videos_rejected():
    """Test missing blobs, shape errors and bad fields."""
    cases = [
        {"features_blob": "missing.lgrt"},
        {"n_frames": 5},
        {"change_points": [0, 2]},
        {"change_points": [3, 2]},
        {"timestamps": [0.0, 1.0]},
        {"query_blob": "f.lgrt"},
        {"extra_field": 1},
    ]
    for fields in cases:
        with tempfile.TemporaryDirectory() as tmp:
            with pytest.raises(DatasetLoadError):
                load_dataset(_write_manifest(Path(tmp), **fields))


def test_annotation_dtype_and_features_checked():
    """Test float annotations and non-finite features are rejected."""
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        path = _write_manifest(root)
        write_blob(root / "a.lgrt", np.array([[0.0, 1.0, 1.0, 0.0]]), "f8")
        with pytest.raises(DatasetLoadError, match="u8"):
            load_dataset(path)

    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        path = _write_manifest(root)
        write_blob(root / "f.lgrt", np.full((4, 2), np.nan), "f8")
        with pytest.raises(DatasetLoadError, match="non-finite"):
            load_dataset(path)


def test_manifest_level_errors():
    """Test unreadable manifests, wrong formats and duplicate ids."""
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        with pytest.raises(DatasetLoadError, match="not found"):
            load_dataset(root)
        (root / "manifest.json").write_text("{")
        with pytest.raises(DatasetLoadError, match="JSON"):
            load_dataset(root)
        (root / "manifest.json").write_text(json.dumps({"format": "other", "feature_dim": 2}))
        with pytest.raises(DatasetLoadError, match="format"):
            load_dataset(root)

        path = _write_manifest(root)
        data = json.loads(path.read_text())
        data["videos"].append(dict(data["videos"][0]))
        path.write_text(json.dumps(data))
        with pytest.raises(DatasetLoadError, match="Duplicate"):
            load_dataset(path)


def test_write_then_load_is_bit_exact():
    """Test a synthetic dataset survives the disk round trip."""
    dataset = synth_dataset(_small_options(with_queries=True))
    with tempfile.TemporaryDirectory() as tmp:
        loaded = load_dataset(write_dataset(dataset, tmp))
    assert loaded.ids() == dataset.ids()
    assert loaded.token_dim == dataset.token_dim == 8
    for a, b in zip(dataset, loaded):
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.annotations.labels, b.annotations.labels)
        assert np.array_equal(a.annotations.importance, b.annotations.importance)
        assert np.array_equal(a.tokens, b.tokens)
        assert a.change_points == b.change_points
        assert a.query_text == b.query_text
        assert a.fps == b.fps


def test_synth_is_deterministic():
    """Test a fixed seed gives byte-identical datasets on disk."""
    with tempfile.TemporaryDirectory() as first, tempfile.TemporaryDirectory() as second:
        write_dataset(synth_dataset(_small_options(seed=5)), first)
        write_dataset(synth_dataset(_small_options(seed=5)), second)
        files = sorted(p.relative_to(first) for p in Path(first).rglob("*") if p.is_file())
        assert files == sorted(p.relative_to(second) for p in Path(second).rglob("*") if p.is_file())
        for rel in files:
            assert (Path(first) / rel).read_bytes() == (Path(second) / rel).read_bytes()

    other = synth_dataset(_small_options(seed=6)).videos[0]
    same = synth_dataset(_small_options(seed=5)).videos[0]
    assert not np.array_equal(other.features[:5], same.features[:5])


def test_synth_annotations():
    """Test label shapes, budgets and disagreement between annotators."""
    dataset = synth_dataset(_small_options(n_videos=5))
    for video in dataset:
        labels = video.annotations.labels
        assert labels.shape == (3, video.n_frames)
        assert labels.dtype == np.uint8
        assert np.all(labels.sum(axis=1) >= 1)
        assert np.all(labels.sum(axis=1) <= max(1, int(0.15 * video.n_frames + 1e-9)))
        assert video.annotations.importance.shape == labels.shape
    assert any(not np.array_equal(v.annotations.labels[0], v.annotations.labels[1]) for v in dataset)

    single = synth_dataset(_small_options(n_annotators=1))
    assert all(v.annotations.n_annotators == 1 for v in single)


def test_synth_queries():
    """Test query tokens and text are generated on request."""
    dataset = synth_dataset(_small_options(with_queries=True))
    assert isinstance(dataset, Dataset)
    for video in dataset:
        assert video.tokens.ndim == 2 and video.tokens.shape[1] == 8
        assert 2 <= video.tokens.shape[0] <= 4
        assert video.query_text.startswith("scene ")
    assert synth_dataset(_small_options()).videos[0].tokens is None


def test_planted_shots_recovered():
    """Test noiseless synthetic shots are found by segmentation."""
    dataset = synth_dataset(_small_options(noise=0.0, n_videos=3))
    for video in dataset:
        seg = kts_segment(video.features, max_changes=10, penalty_coeff=1e-3)
        assert list(seg.change_points) == video.change_points


def test_invalid_options():
    """Test generator option validation."""
    with pytest.raises(ConfigurationError):
        synth_dataset(_small_options(n_videos=0))
    with pytest.raises(ConfigurationError):
        synth_dataset(_small_options(n_frames_range=(5, 40)))
    with pytest.raises(ConfigurationError):
        synth_dataset(_small_options(n_frames_range=(40, 30)))
