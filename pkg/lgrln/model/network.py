"""The summarization network: input projection, optional query fusion,
per-branch bi-threshold graph stacks and the shared scoring head."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import special

from lgrln.config.config import Branch, TrainConfig
from lgrln.errors import DimensionError
from lgrln.model.crossmodal import (
    CrossModalParams,
    TokenProjection,
    embed_tokens,
    fuse,
    init_cross_modal,
    init_token_projection,
)
from lgrln.model.gbt import (
    GbtLayerParams,
    HeadParams,
    add_time_embedding,
    gbt_layer,
    glorot,
    init_layer,
    score_branches,
    sinusoidal_table,
    zeros,
)
from lgrln.model.graphs import VideoGraphs
from lgrln.numerics.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class NetworkOutput:
    """Result of one forward pass."""

    logits: Tensor
    probabilities: Tensor
    branch_probabilities: Dict[str, np.ndarray] = field(default_factory=dict)


class SummarizationNetwork:
    """Frame scorer over the forward, backward and undirected temporal graphs.

    The input projection and the time table are shared by all branches; each
    branch owns its graph layers.
    """

    def __init__(
        self,
        config: TrainConfig,
        input_dim: int,
        token_dim: Optional[int] = None,
        seed: Optional[int] = None,
    ):
        if input_dim < 1:
            raise DimensionError(f"input_dim must be positive, got {input_dim}")
        if token_dim is not None and token_dim < 1:
            raise DimensionError(f"token_dim must be positive, got {token_dim}")
        self.config = config
        self.input_dim = input_dim
        self.token_dim = token_dim
        self.branches: List[Branch] = list(config.model.branches)

        rng = np.random.default_rng(config.seed if seed is None else seed)
        hidden = config.gbt.hidden_dim
        self.input_W = glorot(rng, input_dim, hidden, "input.W")
        self.input_b = zeros((hidden,), "input.b")
        self.time_table = Tensor(
            sinusoidal_table(config.gbt.max_positions, hidden), requires_grad=True, name="time.table"
        )
        self.token_projection: Optional[TokenProjection] = None
        self.cross: Optional[CrossModalParams] = None
        if token_dim is not None:
            self.token_projection = init_token_projection(rng, token_dim, hidden)
            self.cross = init_cross_modal(rng, hidden)
        self.layers: Dict[Branch, List[GbtLayerParams]] = {
            branch: [
                init_layer(rng, hidden, f"{branch.value}.layer{i}")
                for i in range(config.gbt.n_layers)
            ]
            for branch in self.branches
        }
        self.head = HeadParams(W=glorot(rng, hidden, 1, "head.W"), b=zeros((1,), "head.b"))

    def parameters(self) -> Dict[str, Tensor]:
        """All trainable tensors by name, in a fixed order."""
        params: Dict[str, Tensor] = {"input.W": self.input_W, "input.b": self.input_b}
        params["time.table"] = self.time_table
        if self.token_projection is not None and self.cross is not None:
            params["tokens.W"] = self.token_projection.W
            params["tokens.b"] = self.token_projection.b
            params.update(self.cross.named("cross"))
        for branch, layers in self.layers.items():
            for i, layer in enumerate(layers):
                params.update(layer.named(f"{branch.value}.layer{i}"))
        params["head.W"] = self.head.W
        params["head.b"] = self.head.b
        return params

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter array."""
        return {name: t.data.copy() for name, t in self.parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Overwrite parameters from arrays keyed like :meth:`parameters`.

        Raises:
            DimensionError: If a name is missing or unexpected, or a shape differs
        """
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise DimensionError(f"State mismatch: missing={missing} unexpected={unexpected}")
        for name, tensor in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise DimensionError(f"{name}: expected shape {tensor.shape}, got {value.shape}")
            tensor.data = value.copy()

    def encode(
        self,
        features: np.ndarray,
        tokens: Optional[np.ndarray] = None,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Project frame features and fuse query tokens into them."""
        x = Tensor(features)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionError(f"Expected n x {self.input_dim} features, got {x.shape}")
        h = x @ self.input_W + self.input_b
        if tokens is None or np.asarray(tokens).shape[0] == 0:
            return h
        if self.token_projection is None or self.cross is None:
            raise DimensionError("Network was built without a token projection; cannot use a query")
        embedded = embed_tokens(Tensor(tokens), self.token_projection)
        return fuse(h, embedded, self.cross, self.config.gbt.dropout_rate, training, rng)

    def run_branch(
        self,
        branch: Branch,
        h: Tensor,
        graphs: VideoGraphs,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Apply one branch's graph layers to the encoded features."""
        cfg = self.config.gbt
        adjacency = graphs.adjacency(branch)
        for i, layer in enumerate(self.layers[branch]):
            if i in cfg.time_embed_layers:
                h = add_time_embedding(h, graphs.positions, self.time_table, i, cfg)
            h = gbt_layer(h, adjacency, layer, cfg, training=training, rng=rng)
        return h

    def forward(
        self,
        features: np.ndarray,
        graphs: VideoGraphs,
        tokens: Optional[np.ndarray] = None,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> NetworkOutput:
        """Score every frame of one video.

        Args:
            features: n x input_dim frame features
            graphs: Temporal graphs over the n frames
            tokens: Optional L x token_dim query features
            training: Enables dropout
            rng: Generator for dropout masks (required when training)

        Returns:
            Logits, probabilities and per-branch probabilities
        """
        if graphs.n_frames != np.asarray(features).shape[0]:
            raise DimensionError(
                f"Graphs cover {graphs.n_frames} frames, features have {np.asarray(features).shape[0]}"
            )
        h = self.encode(features, tokens, training, rng)
        outputs = [self.run_branch(branch, h, graphs, training, rng) for branch in self.branches]
        logits, probabilities = score_branches(outputs, self.head)
        head_W, head_b = self.head.W.data, self.head.b.data
        branch_probabilities = {
            branch.value: special.expit((out.data @ head_W + head_b).reshape(-1))
            for branch, out in zip(self.branches, outputs)
        }
        return NetworkOutput(logits, probabilities, branch_probabilities)


def count_parameters(network: SummarizationNetwork) -> int:
    """Total number of trainable scalars."""
    return int(sum(t.size for t in network.parameters().values()))


def time_embedding_correlation(table: np.ndarray, n: int) -> np.ndarray:
    """Pearson correlation matrix between the first ``n`` position embeddings."""
    if not 1 <= n <= table.shape[0]:
        raise DimensionError(f"n must lie in [1, {table.shape[0]}], got {n}")
    return np.atleast_2d(np.corrcoef(table[:n]))
