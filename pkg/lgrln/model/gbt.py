"""Bi-threshold graph convolution.

One layer computes, for every node i,

    m_i = sum_{j in N_i} alpha_ij * h_j
    h_i <- GN(h_i + W2 . gelu(W1 . m_i + b1) + b2)

where alpha_ij is 0 below cosine tau1, alpha1 above tau2 and alpha2 in
between. The weights are read off the forward values and act as constants
in the backward pass.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from lgrln.config.config import AggregationMode, GbtConfig
from lgrln.errors import CapacityError, DimensionError
from lgrln.model.graphs import Adjacency
from lgrln.numerics import ops
from lgrln.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

EPS_GN = 1e-5


@dataclass
class GraphNormParams:
    """Per-feature graph normalization parameters."""

    alpha: Tensor
    gamma: Tensor
    beta: Tensor


@dataclass
class GbtLayerParams:
    """Weights of one iteration function (row-vector convention: ``h @ W``)."""

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    norm: GraphNormParams

    def named(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield f"{prefix}.W1", self.W1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.W2", self.W2
        yield f"{prefix}.b2", self.b2
        yield f"{prefix}.norm_alpha", self.norm.alpha
        yield f"{prefix}.norm_gamma", self.norm.gamma
        yield f"{prefix}.norm_beta", self.norm.beta


@dataclass
class HeadParams:
    """Linear scoring head."""

    W: Tensor
    b: Tensor


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    """Glorot-uniform matrix."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(shape: Sequence[int], name: str) -> Tensor:
    return Tensor(np.zeros(tuple(shape)), requires_grad=True, name=name)


def ones(shape: Sequence[int], name: str) -> Tensor:
    return Tensor(np.ones(tuple(shape)), requires_grad=True, name=name)


def init_graph_norm(dim: int, prefix: str) -> GraphNormParams:
    return GraphNormParams(
        alpha=ones((dim,), f"{prefix}.norm_alpha"),
        gamma=ones((dim,), f"{prefix}.norm_gamma"),
        beta=zeros((dim,), f"{prefix}.norm_beta"),
    )


def init_layer(rng: np.random.Generator, dim: int, prefix: str) -> GbtLayerParams:
    """Fresh iteration-function weights for a ``dim``-wide layer."""
    return GbtLayerParams(
        W1=glorot(rng, dim, dim, f"{prefix}.W1"),
        b1=zeros((dim,), f"{prefix}.b1"),
        W2=glorot(rng, dim, dim, f"{prefix}.W2"),
        b2=zeros((dim,), f"{prefix}.b2"),
        norm=init_graph_norm(dim, prefix),
    )


def sinusoidal_table(max_positions: int, dim: int) -> np.ndarray:
    """Sine/cosine position table used to initialise the time embedding."""
    positions = np.arange(max_positions, dtype=np.float64)[:, None]
    rates = 1.0 / np.power(10000.0, (2 * (np.arange(dim) // 2)) / dim)
    angles = positions * rates[None, :]
    table = np.empty((max_positions, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


def bi_threshold_weights(cosines: np.ndarray, cfg: GbtConfig) -> np.ndarray:
    """Map neighbour cosines to {0, alpha1, alpha2}.

    Values exactly at a threshold take alpha2.
    """
    if cfg.aggregation == AggregationMode.SUM:
        return np.ones_like(cosines)
    weights = np.full_like(cosines, cfg.alpha2)
    weights[cosines < cfg.tau1] = 0.0
    weights[cosines > cfg.tau2] = cfg.alpha1
    return weights


def aggregation_matrix(h: np.ndarray, adjacency: Adjacency, cfg: GbtConfig) -> sparse.csr_matrix:
    """Sparse n x n matrix A with ``A[i, j] = alpha_ij`` for the current features."""
    n = adjacency.n_nodes
    if h.shape[0] != n:
        raise DimensionError(f"Features have {h.shape[0]} rows but graph has {n} nodes")
    sources, targets, indptr = adjacency.row_layout
    weights = bi_threshold_weights(ops.row_cosines(h, targets, sources), cfg)
    return sparse.csr_matrix((weights, sources, indptr), shape=(n, n))


def aggregate(h: Tensor, adjacency: Adjacency, cfg: GbtConfig) -> Tensor:
    """Bi-threshold neighbour aggregation; isolated nodes get zero messages."""
    return ops.sparse_matmul(aggregation_matrix(h.data, adjacency, cfg), h)


def graph_norm(h: Tensor, params: GraphNormParams, eps: float = EPS_GN) -> Tensor:
    """Graph normalization over the nodes of one graph.

    ``gamma * (h - alpha * mean) / sqrt(mean((h - alpha * mean)^2) + eps) + beta``
    """
    if h.ndim != 2 or h.shape[0] < 1:
        raise DimensionError(f"graph_norm needs an (n >= 1) x d matrix, got {h.shape}")
    mu = ops.mean(h, axis=0, keepdims=True)
    centred = h - params.alpha * mu
    sigma = ops.sqrt(ops.mean(centred * centred, axis=0, keepdims=True) + eps)
    return params.gamma * (centred / sigma) + params.beta


def iteration(
    h: Tensor,
    message: Tensor,
    params: GbtLayerParams,
    dropout_rate: float,
    training: bool,
    rng: Optional[np.random.Generator],
) -> Tensor:
    """Residual two-layer MLP update followed by graph normalization."""
    hidden = ops.gelu(message @ params.W1 + params.b1)
    if training and dropout_rate > 0.0:
        if rng is None:
            raise ValueError("Training-mode dropout needs a random generator")
        hidden = ops.dropout(hidden, dropout_rate, rng)
    return graph_norm(h + hidden @ params.W2 + params.b2, params.norm)


def gbt_layer(
    h: Tensor,
    adjacency: Adjacency,
    params: GbtLayerParams,
    cfg: GbtConfig,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """One bi-threshold graph convolution layer."""
    message = aggregate(h, adjacency, cfg)
    return iteration(h, message, params, cfg.dropout_rate, training, rng)


def add_time_embedding(
    h: Tensor,
    positions: np.ndarray,
    table: Tensor,
    layer_index: int,
    cfg: GbtConfig,
) -> Tensor:
    """Add the learned position embedding ``table[positions]`` to ``h``.

    Raises:
        CapacityError: If a position is beyond the table
        ValueError: If the layer is not configured for time embedding
    """
    if layer_index not in cfg.time_embed_layers:
        raise ValueError(f"Layer {layer_index} is not in time_embed_layers {cfg.time_embed_layers}")
    positions = np.asarray(positions, dtype=np.int64)
    max_positions = table.shape[0]
    outside = (positions < 0) | (positions >= max_positions)
    if outside.any():
        bad = int(positions[np.argmax(outside)])
        raise CapacityError(
            f"Frame position {bad} lies outside the time embedding "
            f"capacity max_positions={max_positions}"
        )
    return h + ops.take_rows(table, positions)


def score_branches(branch_outputs: Sequence[Tensor], head: HeadParams) -> Tuple[Tensor, Tensor]:
    """Sum branch features, apply the linear head and the sigmoid.

    Returns:
        Per-node logits ``z`` and probabilities ``p``, both of shape (n,)
    """
    if not branch_outputs:
        raise DimensionError("score_branches needs at least one branch output")
    shape = branch_outputs[0].shape
    for out in branch_outputs[1:]:
        if out.shape != shape:
            raise DimensionError(f"Branch outputs disagree: {shape} vs {out.shape}")
    total = branch_outputs[0]
    for out in branch_outputs[1:]:
        total = total + out
    logits = ops.reshape(total @ head.W + head.b, (shape[0],))
    return logits, ops.sigmoid(logits)
