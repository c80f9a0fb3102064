"""Dataset manifests: loading with full validation, and writing."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from lgrln.errors import DatasetLoadError
from lgrln.numerics.blob import read_blob, write_blob
from lgrln.persistence.models import DATASET_FORMAT, DatasetManifest, VideoEntry
from lgrln.training.emloss import AnnotationSet
from lgrln.utils.files import atomic_write

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class Video:
    """One validated video held in memory."""

    id: str
    features: np.ndarray
    annotations: AnnotationSet
    fps: float
    change_points: Optional[List[int]] = None
    timestamps: Optional[np.ndarray] = None
    query_text: Optional[str] = None
    tokens: Optional[np.ndarray] = None

    @property
    def n_frames(self) -> int:
        return int(self.features.shape[0])


@dataclass
class Dataset:
    """Videos sharing one feature (and optional token) dimension."""

    feature_dim: int
    token_dim: Optional[int] = None
    videos: List[Video] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.videos)

    def __iter__(self) -> Iterator[Video]:
        return iter(self.videos)

    def ids(self) -> List[str]:
        return [v.id for v in self.videos]

    def subset(self, ids: List[str]) -> "Dataset":
        """Videos with the given ids, in the given order."""
        by_id = {v.id: v for v in self.videos}
        return Dataset(self.feature_dim, self.token_dim, [by_id[i] for i in ids])


def _read_manifest(path: Path) -> DatasetManifest:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise DatasetLoadError("Manifest not found", path=str(path)) from e
    except json.JSONDecodeError as e:
        raise DatasetLoadError(f"Manifest is not valid JSON: {e}", path=str(path)) from e
    try:
        manifest = DatasetManifest(**data) if isinstance(data, dict) else None
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise DatasetLoadError(f"Invalid manifest: {first['msg']}", path=str(path), field=loc) from e
    if manifest is None:
        raise DatasetLoadError("Manifest must be a JSON object", path=str(path))
    if manifest.format != DATASET_FORMAT:
        raise DatasetLoadError(f"Unexpected format {manifest.format!r}", path=str(path), field="format")
    return manifest


def _load_video(entry: VideoEntry, manifest: DatasetManifest, root: Path) -> Video:
    def fail(message: str, blob_field: str, blob: Optional[str] = None) -> DatasetLoadError:
        target = str(root / blob) if blob else str(root / MANIFEST_NAME)
        return DatasetLoadError(f"video {entry.id}: {message}", path=target, field=blob_field)

    def read(blob_field: str, blob: str) -> np.ndarray:
        try:
            return read_blob(root / blob)
        except DatasetLoadError as e:
            raise fail(e.reason, blob_field, blob) from e

    n = entry.n_frames
    features = read("features_blob", entry.features_blob)
    if features.dtype.kind != "f" or features.shape != (n, manifest.feature_dim):
        raise fail(
            f"features have shape {features.shape} ({features.dtype}), expected ({n}, {manifest.feature_dim}) floats",
            "features_blob",
            entry.features_blob,
        )
    if not np.isfinite(features).all():
        raise fail("features contain non-finite values", "features_blob", entry.features_blob)

    labels = read("annotations_blob", entry.annotations_blob)
    if labels.dtype != np.uint8:
        raise fail(f"annotations must be u8, got {labels.dtype}", "annotations_blob", entry.annotations_blob)
    if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] != n:
        raise fail(
            f"annotations have shape {labels.shape}, expected (m, {n})", "annotations_blob", entry.annotations_blob
        )
    if not np.isin(labels, (0, 1)).all():
        bad = int(labels[~np.isin(labels, (0, 1))][0])
        raise fail(f"annotations contain non-binary value {bad}", "annotations_blob", entry.annotations_blob)

    importance = None
    if entry.importance_blob is not None:
        importance = read("importance_blob", entry.importance_blob).astype(np.float64)
        if importance.shape != labels.shape:
            raise fail(
                f"importance has shape {importance.shape}, expected {labels.shape}",
                "importance_blob",
                entry.importance_blob,
            )

    if entry.change_points is not None:
        cps = entry.change_points
        if any(not 0 < c < n for c in cps) or any(b <= a for a, b in zip(cps, cps[1:])):
            raise fail(f"change_points {cps} must increase strictly inside (0, {n})", "change_points")

    timestamps = None
    if entry.timestamps is not None:
        timestamps = np.asarray(entry.timestamps, dtype=np.float64)
        if timestamps.shape != (n,):
            raise fail(f"{timestamps.shape[0]} timestamps for {n} frames", "timestamps")

    tokens = None
    if entry.query_blob is not None:
        if manifest.token_dim is None:
            raise fail("query_blob given but the manifest declares no token_dim", "query_blob", entry.query_blob)
        tokens = read("query_blob", entry.query_blob).astype(np.float64)
        if tokens.ndim != 2 or tokens.shape[1] != manifest.token_dim:
            raise fail(
                f"query tokens have shape {tokens.shape}, expected (L, {manifest.token_dim})",
                "query_blob",
                entry.query_blob,
            )

    return Video(
        id=entry.id,
        features=features.astype(np.float64),
        annotations=AnnotationSet(labels=labels, importance=importance),
        fps=entry.fps,
        change_points=list(entry.change_points) if entry.change_points is not None else None,
        timestamps=timestamps,
        query_text=entry.query_text,
        tokens=tokens,
    )


def load_dataset(manifest_path: Union[str, Path]) -> Dataset:
    """Load and validate a dataset manifest with all of its blobs.

    Args:
        manifest_path: Manifest file, or the directory holding ``manifest.json``

    Returns:
        In-memory dataset

    Raises:
        DatasetLoadError: On any missing blob or invalid field; the message
            names the video, the path and the field
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = _read_manifest(path)

    seen = set()
    for entry in manifest.videos:
        if entry.id in seen:
            raise DatasetLoadError(f"Duplicate video id {entry.id!r}", path=str(path), field="videos.id")
        seen.add(entry.id)

    videos = [_load_video(entry, manifest, path.parent) for entry in manifest.videos]
    logger.info(f"Loaded dataset from {path} with {len(videos)} videos")
    return Dataset(manifest.feature_dim, manifest.token_dim, videos)


def write_dataset(dataset: Dataset, out_dir: Union[str, Path]) -> Path:
    """Write blobs and the manifest (last) under ``out_dir``.

    Returns:
        Path of the written manifest
    """
    out_dir = Path(out_dir)
    blob_dir = out_dir / "blobs"
    entries = []
    for video in dataset.videos:
        features_blob = f"blobs/{video.id}.features.lgrt"
        annotations_blob = f"blobs/{video.id}.annotations.lgrt"
        write_blob(out_dir / features_blob, video.features, "f8")
        write_blob(out_dir / annotations_blob, video.annotations.labels, "u1")
        importance_blob = None
        if video.annotations.importance is not None:
            importance_blob = f"blobs/{video.id}.importance.lgrt"
            write_blob(out_dir / importance_blob, video.annotations.importance, "f8")
        query_blob = None
        if video.tokens is not None:
            query_blob = f"blobs/{video.id}.query.lgrt"
            write_blob(out_dir / query_blob, video.tokens, "f8")
        entries.append(
            VideoEntry(
                id=video.id,
                n_frames=video.n_frames,
                fps=video.fps,
                features_blob=features_blob,
                annotations_blob=annotations_blob,
                importance_blob=importance_blob,
                change_points=video.change_points,
                timestamps=video.timestamps.tolist() if video.timestamps is not None else None,
                query_text=video.query_text,
                query_blob=query_blob,
            )
        )
    blob_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(feature_dim=dataset.feature_dim, token_dim=dataset.token_dim, videos=entries)
    path = out_dir / MANIFEST_NAME
    atomic_write(path, manifest.model_dump_json(indent=2, exclude_none=True))
    logger.info(f"Wrote dataset with {len(entries)} videos to {path}")
    return path
