"""Temporal video graphs.

Frames become nodes; two frames are joined when their time interval is
strictly below ``tau`` seconds. The forward graph points from the earlier to
the later frame, the backward graph the other way, and the undirected graph
stores each pair once as ``(i, j)`` with ``i < j``. Feature values play no
part in construction.
"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from lgrln.config.config import Branch
from lgrln.errors import ConfigurationError, DimensionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Adjacency:
    """Message-passing view of a graph: node ``targets[k]`` reads ``sources[k]``."""

    n_nodes: int
    sources: np.ndarray
    targets: np.ndarray

    @classmethod
    def from_neighbor_lists(cls, neighbors: Sequence[Sequence[int]]) -> "Adjacency":
        """Build from per-node neighbour lists (``neighbors[i]`` feeds node i)."""
        n = len(neighbors)
        sources: List[int] = []
        targets: List[int] = []
        for i, nbrs in enumerate(neighbors):
            for j in nbrs:
                if not 0 <= j < n:
                    raise DimensionError(f"Neighbour index {j} of node {i} outside [0, {n})")
                sources.append(int(j))
                targets.append(i)
        return cls(n, np.asarray(sources, dtype=np.int64), np.asarray(targets, dtype=np.int64))

    def neighbor_lists(self) -> List[List[int]]:
        """Per-node neighbour lists in edge order."""
        lists: List[List[int]] = [[] for _ in range(self.n_nodes)]
        for s, t in zip(self.sources.tolist(), self.targets.tolist()):
            lists[t].append(s)
        return lists

    @property
    def n_edges(self) -> int:
        return int(self.sources.shape[0])

    @cached_property
    def row_layout(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edges grouped by target node as ``(sources, targets, indptr)`` in CSR order."""
        order = np.argsort(self.targets, kind="stable")
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.targets, minlength=self.n_nodes), out=indptr[1:])
        return self.sources[order], self.targets[order], indptr


@dataclass(frozen=True)
class VideoGraphs:
    """Forward, backward and undirected edge sets over one video's frames."""

    n_frames: int
    positions: np.ndarray
    fps: float
    edges_forward: np.ndarray
    edges_backward: np.ndarray
    edges_undirected: np.ndarray

    def adjacency(self, branch: Union[Branch, str]) -> Adjacency:
        """Message-passing adjacency for one branch, built once per graph set."""
        return self._adjacencies[Branch(branch)]

    @cached_property
    def _adjacencies(self) -> Dict[Branch, Adjacency]:
        return {branch: self._build_adjacency(branch) for branch in Branch}

    def _build_adjacency(self, branch: Branch) -> Adjacency:
        if branch is Branch.FORWARD:
            edges = self.edges_forward
            return Adjacency(self.n_frames, edges[:, 0].copy(), edges[:, 1].copy())
        if branch is Branch.BACKWARD:
            edges = self.edges_backward
            return Adjacency(self.n_frames, edges[:, 0].copy(), edges[:, 1].copy())
        edges = self.edges_undirected
        return Adjacency(
            self.n_frames,
            np.concatenate([edges[:, 0], edges[:, 1]]),
            np.concatenate([edges[:, 1], edges[:, 0]]),
        )

    def to_json(self) -> Dict[str, object]:
        """Plain JSON structure for debugging dumps."""
        return {
            "n_frames": self.n_frames,
            "fps": self.fps,
            "positions": self.positions.tolist(),
            "edges_forward": self.edges_forward.tolist(),
            "edges_backward": self.edges_backward.tolist(),
            "edges_undirected": self.edges_undirected.tolist(),
        }


def build_graphs(
    n_frames: int,
    fps: float,
    tau: float,
    timestamps: Optional[Sequence[float]] = None,
) -> VideoGraphs:
    """Build the three temporal graphs of a video.

    Args:
        n_frames: Number of frame nodes (>= 1)
        fps: Sampling rate used to turn positions into seconds
        tau: Edge threshold in seconds; intervals equal to ``tau`` are excluded
        timestamps: Optional explicit per-frame times (seconds), overriding
            ``position / fps``

    Returns:
        The graph triple

    Raises:
        ConfigurationError: If ``fps`` or ``tau`` is not positive
    """
    if fps <= 0:
        raise ConfigurationError(f"fps must be positive, got {fps}")
    if tau <= 0:
        raise ConfigurationError(f"tau must be positive, got {tau}")
    if n_frames < 1:
        raise ConfigurationError(f"n_frames must be >= 1, got {n_frames}")

    positions = np.arange(n_frames, dtype=np.int64)
    if timestamps is None:
        # Uniform sampling: offsets d with d / fps < tau connect every (i, i + d).
        pairs = []
        d = 1
        while d < n_frames and d / fps < tau:
            first = np.arange(n_frames - d, dtype=np.int64)
            pairs.append(np.stack([first, first + d], axis=1))
            d += 1
        forward = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
        order = np.lexsort((forward[:, 1], forward[:, 0]))
        forward = forward[order]
    else:
        times = np.asarray(timestamps, dtype=np.float64)
        if times.shape != (n_frames,):
            raise DimensionError(f"timestamps have shape {times.shape}, expected ({n_frames},)")
        i, j = np.triu_indices(n_frames, k=1)
        close = np.abs(times[j] - times[i]) < tau
        forward = np.stack([i[close], j[close]], axis=1).astype(np.int64)

    graphs = VideoGraphs(
        n_frames=n_frames,
        positions=positions,
        fps=float(fps),
        edges_forward=forward,
        edges_backward=forward[:, ::-1].copy(),
        edges_undirected=forward.copy(),
    )
    logger.debug(f"Built graphs over {n_frames} frames with {len(forward)} edges each")
    return graphs


def dump_graphs(graphs: Dict[str, VideoGraphs], path: Union[str, Path]) -> None:
    """Write graphs keyed by video id as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump({key: g.to_json() for key, g in graphs.items()}, f, indent=2)
    logger.info(f"Dumped {len(graphs)} graph sets to {path}")
