"""Finite-difference checks for every trainable operation.

Each instance draws small random inputs and weights, reduces the operation's
output to a scalar with a fixed random projection, and compares tape
gradients with central differences in 64-bit precision. Graph instances whose
neighbour cosines sit within ``THRESHOLD_MARGIN`` of a threshold are redrawn,
since a finite-difference step could flip a piecewise weight there.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from lgrln.config.config import GbtConfig, LossConfig
from lgrln.model.crossmodal import TokenProjection, embed_tokens, fuse, init_cross_modal
from lgrln.model.gbt import (
    GbtLayerParams,
    GraphNormParams,
    HeadParams,
    add_time_embedding,
    gbt_layer,
    graph_norm,
    init_layer,
    score_branches,
)
from lgrln.model.graphs import Adjacency
from lgrln.numerics import ops
from lgrln.numerics.gradcheck import DEFAULT_TOLERANCE, GradCheckResult, check_gradients
from lgrln.numerics.tensor import Tensor
from lgrln.training.emloss import AnnotationSet, biased_bce, e_step

logger = logging.getLogger(__name__)

THRESHOLD_MARGIN = 1e-3
N_NODES = 6
DIM = 4

Instance = Tuple[Callable[[], Tensor], List[Tensor]]


@dataclass
class SuiteEntry:
    """Worst relative error of one operation over all instances."""

    operation: str
    instances: int
    max_error: float
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance


def _param(rng: np.random.Generator, shape: Sequence[int], name: str, scale: float = 0.5) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=tuple(shape)), requires_grad=True, name=name)


def _projection(rng: np.random.Generator, out: Tensor) -> Tensor:
    weights = Tensor(rng.normal(size=out.shape))
    return ops.sum(out * weights)


def _randomize_layer(rng: np.random.Generator, layer: GbtLayerParams) -> GbtLayerParams:
    for name, tensor in layer.named("layer"):
        if name.endswith("norm_alpha"):
            tensor.data = rng.uniform(0.2, 0.8, size=tensor.shape)
        elif name.endswith("norm_gamma"):
            tensor.data = rng.uniform(0.5, 1.5, size=tensor.shape)
        elif not name.endswith(("W1", "W2")):
            tensor.data = rng.normal(0.0, 0.1, size=tensor.shape)
    return layer


def _random_graph(rng: np.random.Generator, h: np.ndarray, cfg: GbtConfig) -> Adjacency:
    while True:
        neighbors = [[j for j in range(N_NODES) if j != i and rng.random() < 0.5] for i in range(N_NODES)]
        adjacency = Adjacency.from_neighbor_lists(neighbors)
        cos = ops.row_cosines(h, adjacency.targets, adjacency.sources)
        margin = np.min(np.abs(np.concatenate([cos - cfg.tau1, cos - cfg.tau2])), initial=1.0)
        if margin > THRESHOLD_MARGIN:
            return adjacency


def _gbt_layer_instance(rng: np.random.Generator) -> Instance:
    cfg = GbtConfig(hidden_dim=DIM, dropout_rate=0.0)
    h = _param(rng, (N_NODES, DIM), "h", 1.0)
    adjacency = _random_graph(rng, h.data, cfg)
    layer = _randomize_layer(rng, init_layer(rng, DIM, "layer"))
    weights = Tensor(rng.normal(size=(N_NODES, DIM)))

    def fn() -> Tensor:
        return ops.sum(gbt_layer(h, adjacency, layer, cfg) * weights)

    return fn, [h, layer.W1, layer.b1, layer.W2, layer.b2, layer.norm.alpha, layer.norm.gamma, layer.norm.beta]


def _graph_norm_instance(rng: np.random.Generator) -> Instance:
    h = _param(rng, (N_NODES, DIM), "h", 1.0)
    params = GraphNormParams(
        alpha=Tensor(rng.uniform(0.2, 0.8, DIM), requires_grad=True, name="alpha"),
        gamma=Tensor(rng.uniform(0.5, 1.5, DIM), requires_grad=True, name="gamma"),
        beta=_param(rng, (DIM,), "beta"),
    )
    weights = Tensor(rng.normal(size=(N_NODES, DIM)))
    return (lambda: ops.sum(graph_norm(h, params) * weights)), [h, params.alpha, params.gamma, params.beta]


def _time_embedding_instance(rng: np.random.Generator) -> Instance:
    cfg = GbtConfig(hidden_dim=DIM, max_positions=8)
    h = _param(rng, (N_NODES, DIM), "h")
    table = _param(rng, (8, DIM), "table")
    positions = rng.integers(0, 8, size=N_NODES)
    weights = Tensor(rng.normal(size=(N_NODES, DIM)))
    return (lambda: ops.sum(add_time_embedding(h, positions, table, 0, cfg) * weights)), [h, table]


def _fuse_instance(rng: np.random.Generator) -> Instance:
    video = _param(rng, (N_NODES, DIM), "video")
    tokens = _param(rng, (3, DIM), "tokens")
    params = init_cross_modal(rng, DIM)
    _randomize_layer(rng, params.mlp)
    for key in ("b1", "b2", "b3"):
        getattr(params, key).data = rng.normal(0.0, 0.1, size=DIM)
    weights = Tensor(rng.normal(size=(N_NODES, DIM)))
    wrt = [video, tokens, *(tensor for _, tensor in params.named("cross"))]
    return (lambda: ops.sum(fuse(video, tokens, params) * weights)), wrt


def _embed_tokens_instance(rng: np.random.Generator) -> Instance:
    raw = _param(rng, (3, 5), "raw", 1.0)
    projection = TokenProjection(W=_param(rng, (5, DIM), "W"), b=_param(rng, (DIM,), "b"))
    weights = Tensor(rng.normal(size=(3, DIM)))
    return (lambda: ops.sum(embed_tokens(raw, projection) * weights)), [raw, projection.W, projection.b]


def _scoring_head_instance(rng: np.random.Generator) -> Instance:
    branches = [_param(rng, (N_NODES, DIM), f"branch{i}") for i in range(3)]
    head = HeadParams(W=_param(rng, (DIM, 1), "head.W"), b=_param(rng, (1,), "head.b"))
    weights = Tensor(rng.normal(size=N_NODES))
    return (lambda: ops.sum(score_branches(branches, head)[1] * weights)), [*branches, head.W, head.b]


def _biased_bce_instance(rng: np.random.Generator) -> Instance:
    p = Tensor(rng.uniform(0.05, 0.95, size=N_NODES), requires_grad=True, name="p")
    annotations = AnnotationSet(labels=rng.integers(0, 2, size=(4, N_NODES)).astype(np.uint8))
    mixture = e_step(p, annotations, LossConfig(a=0.1, b=0.6, subset_size=2))
    return (lambda: biased_bce(p, annotations, mixture)), [p]


OPERATIONS: Dict[str, Callable[[np.random.Generator], Instance]] = {
    "gbt_layer": _gbt_layer_instance,
    "graph_norm": _graph_norm_instance,
    "time_embedding": _time_embedding_instance,
    "crossmodal_fuse": _fuse_instance,
    "embed_tokens": _embed_tokens_instance,
    "scoring_head": _scoring_head_instance,
    "biased_bce": _biased_bce_instance,
}


def check_operation(name: str, seed: int = 0, instances: int = 20) -> SuiteEntry:
    """Run ``instances`` random gradient checks of one operation."""
    rng = np.random.default_rng([seed, sorted(OPERATIONS).index(name)])
    worst = 0.0
    for _ in range(instances):
        fn, wrt = OPERATIONS[name](rng)
        result: GradCheckResult = check_gradients(fn, wrt)
        worst = max(worst, result.max_error)
    entry = SuiteEntry(operation=name, instances=instances, max_error=worst)
    logger.info(f"Gradient check {name}: max relative error {worst:.2e} ({'ok' if entry.passed else 'FAILED'})")
    return entry


def run_gradient_suite(seed: int = 0, instances: int = 20) -> List[SuiteEntry]:
    """Check every trainable operation."""
    return [check_operation(name, seed, instances) for name in OPERATIONS]
