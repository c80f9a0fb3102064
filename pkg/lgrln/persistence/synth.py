"""Synthetic datasets with planted shots and disagreeing annotators.

Each video is a sequence of scenes, each scene a few shots. Frame features
are the shot mean (scene centroid plus a shot offset) plus Gaussian noise.
Scenes carry a hidden interest score; every annotator walks the scenes by
interest and keeps either the first or the last shot of each, so the label
sets disagree systematically while agreeing on which scenes matter.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from lgrln.errors import ConfigurationError
from lgrln.persistence.dataset import Dataset, Video
from lgrln.summary.summarize import budget_frames
from lgrln.training.emloss import AnnotationSet

logger = logging.getLogger(__name__)

SHOTS_PER_SCENE = 2
MIN_SHOT_LENGTH = 2
SHOT_OFFSET_SCALE = 0.5
ANNOTATOR_BUDGET = 0.15


@dataclass
class SynthOptions:
    """Generator settings."""

    n_videos: int = 10
    n_frames_range: Tuple[int, int] = (60, 120)
    n_scenes: int = 5
    n_annotators: int = 3
    seed: int = 0
    with_queries: bool = False
    feature_dim: int = 32
    fps: float = 2.0
    noise: float = 0.1

    def validate(self) -> None:
        low, high = self.n_frames_range
        if min(self.n_videos, self.n_scenes, self.n_annotators, self.feature_dim) < 1:
            raise ConfigurationError("videos, scenes, annotators and feature_dim must be positive")
        needed = self.n_scenes * SHOTS_PER_SCENE * MIN_SHOT_LENGTH
        if low < needed or high < low:
            raise ConfigurationError(
                f"frame range {self.n_frames_range} must satisfy {needed} <= min <= max "
                f"for {self.n_scenes} scenes"
            )
        if self.fps <= 0 or self.noise < 0:
            raise ConfigurationError("fps must be positive and noise non-negative")


def _shot_lengths(rng: np.random.Generator, n: int, n_shots: int) -> np.ndarray:
    spare = n - n_shots * MIN_SHOT_LENGTH
    return MIN_SHOT_LENGTH + rng.multinomial(spare, np.full(n_shots, 1.0 / n_shots))


def _annotate(
    rng: np.random.Generator,
    interest: np.ndarray,
    shot_bounds: List[Tuple[int, int]],
    n: int,
    n_annotators: int,
    must_include: Optional[int],
) -> Tuple[np.ndarray, np.ndarray]:
    budget = max(1, budget_frames(n, ANNOTATOR_BUDGET))
    labels = np.zeros((n_annotators, n), dtype=np.uint8)
    importance = np.zeros((n_annotators, n), dtype=np.float64)
    n_scenes = len(interest)
    for k in range(n_annotators):
        seen = interest + rng.normal(0.0, 0.05, size=n_scenes)
        if must_include is not None:
            seen[must_include] = np.inf
        order = np.argsort(-seen, kind="stable")
        take_last = k % 2 == 1
        used = 0
        for rank, scene in enumerate(order):
            shot = scene * SHOTS_PER_SCENE + (SHOTS_PER_SCENE - 1 if take_last else 0)
            start, end = shot_bounds[shot]
            if rank == 0:
                # the top scene is always kept, truncated to the budget if needed
                end = min(end, start + budget)
            if used + (end - start) <= budget:
                labels[k, start:end] = 1
                used += end - start
        for scene in range(n_scenes):
            first = shot_bounds[scene * SHOTS_PER_SCENE][0]
            last = shot_bounds[scene * SHOTS_PER_SCENE + SHOTS_PER_SCENE - 1][1]
            importance[k, first:last] = np.clip(interest[scene] + rng.normal(0.0, 0.05), 0.0, 1.0)
    return labels, importance


def synth_video(rng: np.random.Generator, video_id: str, options: SynthOptions) -> Video:
    """Generate one video with its annotations."""
    low, high = options.n_frames_range
    n = int(rng.integers(low, high + 1))
    n_shots = options.n_scenes * SHOTS_PER_SCENE
    lengths = _shot_lengths(rng, n, n_shots)
    ends = np.cumsum(lengths)
    starts = ends - lengths
    shot_bounds = [(int(s), int(e)) for s, e in zip(starts, ends)]

    dim = options.feature_dim
    centroids = rng.normal(0.0, 1.0, size=(options.n_scenes, dim))
    offsets = rng.normal(0.0, SHOT_OFFSET_SCALE, size=(n_shots, dim))
    shot_means = np.repeat(centroids, SHOTS_PER_SCENE, axis=0) + offsets
    features = np.repeat(shot_means, lengths, axis=0)
    features = features + options.noise * rng.normal(0.0, 1.0, size=features.shape)

    interest = rng.uniform(0.0, 1.0, size=options.n_scenes)
    tokens = None
    query_text = None
    query_scene = None
    if options.with_queries:
        query_scene = int(rng.integers(options.n_scenes))
        n_tokens = int(rng.integers(2, 5))
        tokens = centroids[query_scene] + options.noise * rng.normal(0.0, 1.0, size=(n_tokens, dim))
        query_text = f"scene {query_scene}"

    labels, importance = _annotate(rng, interest, shot_bounds, n, options.n_annotators, query_scene)
    return Video(
        id=video_id,
        features=features,
        annotations=AnnotationSet(labels=labels, importance=importance),
        fps=options.fps,
        change_points=[int(e) for e in ends[:-1]],
        query_text=query_text,
        tokens=tokens,
    )


def synth_dataset(options: SynthOptions) -> Dataset:
    """Generate a dataset; the same options always give the same arrays."""
    options.validate()
    videos = []
    for i in range(options.n_videos):
        rng = np.random.default_rng([options.seed, i])
        videos.append(synth_video(rng, f"video_{i:03d}", options))
    token_dim = options.feature_dim if options.with_queries else None
    logger.info(f"Generated {len(videos)} synthetic videos (seed {options.seed})")
    return Dataset(feature_dim=options.feature_dim, token_dim=token_dim, videos=videos)
