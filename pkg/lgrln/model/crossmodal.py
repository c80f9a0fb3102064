"""Language-guided fusion of query tokens into video nodes.

Every token node sends a message to every video node; no other edges are
used. Attention logits are plain dot products of the projected query and key.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from lgrln.errors import DimensionError
from lgrln.model.gbt import GbtLayerParams, glorot, init_layer, iteration, zeros
from lgrln.numerics import ops
from lgrln.numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class TokenProjection:
    """Affine map from raw token features to the hidden width."""

    W: Tensor
    b: Tensor


@dataclass
class CrossModalParams:
    """Value (W1), query (W2) and key (W3) projections plus the update MLP."""

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    W3: Tensor
    b3: Tensor
    mlp: GbtLayerParams

    def named(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        for key in ("W1", "b1", "W2", "b2", "W3", "b3"):
            yield f"{prefix}.{key}", getattr(self, key)
        yield from self.mlp.named(f"{prefix}.mlp")


def init_token_projection(rng: np.random.Generator, token_dim: int, hidden_dim: int) -> TokenProjection:
    return TokenProjection(
        W=glorot(rng, token_dim, hidden_dim, "tokens.W"),
        b=zeros((hidden_dim,), "tokens.b"),
    )


def init_cross_modal(rng: np.random.Generator, hidden_dim: int, prefix: str = "cross") -> CrossModalParams:
    return CrossModalParams(
        W1=glorot(rng, hidden_dim, hidden_dim, f"{prefix}.W1"),
        b1=zeros((hidden_dim,), f"{prefix}.b1"),
        W2=glorot(rng, hidden_dim, hidden_dim, f"{prefix}.W2"),
        b2=zeros((hidden_dim,), f"{prefix}.b2"),
        W3=glorot(rng, hidden_dim, hidden_dim, f"{prefix}.W3"),
        b3=zeros((hidden_dim,), f"{prefix}.b3"),
        mlp=init_layer(rng, hidden_dim, f"{prefix}.mlp"),
    )


def embed_tokens(raw_tokens: Tensor, projection: TokenProjection) -> Tensor:
    """Project L x D_t token features to L x hidden_dim."""
    if raw_tokens.ndim != 2 or raw_tokens.shape[1] != projection.W.shape[0]:
        raise DimensionError(
            f"Token features {raw_tokens.shape} do not match projection input "
            f"{projection.W.shape[0]}"
        )
    return raw_tokens @ projection.W + projection.b


def attention(video: Tensor, tokens: Tensor, params: CrossModalParams) -> Tensor:
    """Row-stochastic n x L attention of video nodes over tokens."""
    query = video @ params.W2 + params.b2
    key = tokens @ params.W3 + params.b3
    if query.shape[1] != key.shape[1]:
        raise DimensionError(f"Query width {query.shape[1]} differs from key width {key.shape[1]}")
    return ops.softmax(query @ key.T, axis=1)


def fuse(
    video: Tensor,
    tokens: Optional[Tensor],
    params: CrossModalParams,
    dropout_rate: float = 0.0,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Fuse token messages into video node features.

    With no tokens (``None`` or L = 0) the video features are returned as is.

    Args:
        video: n x D video node features
        tokens: L x D embedded token features
        params: Attention and update weights
        dropout_rate: Dropout applied to the MLP activation in training
        training: Whether dropout is active
        rng: Generator for dropout masks

    Returns:
        Fused n x D video features
    """
    if tokens is None or tokens.shape[0] == 0:
        return video
    if tokens.ndim != 2 or tokens.shape[1] != video.shape[1]:
        raise DimensionError(f"Token features {tokens.shape} do not match video width {video.shape[1]}")
    weights = attention(video, tokens, params)
    message = weights @ (tokens @ params.W1 + params.b1)
    return iteration(video, message, params.mlp, dropout_rate, training, rng)
