"""Tests for bi-threshold graph layers."""

import numpy as np
import pytest

from lgrln.config.config import AggregationMode, GbtConfig
from lgrln.errors import CapacityError, DimensionError
from lgrln.model.gbt import (
    HeadParams,
    add_time_embedding,
    aggregate,
    aggregation_matrix,
    bi_threshold_weights,
    gbt_layer,
    graph_norm,
    init_graph_norm,
    init_layer,
    iteration,
    score_branches,
    sinusoidal_table,
)
from lgrln.model.graphs import Adjacency, build_graphs
from lgrln.numerics import ops
from lgrln.numerics.gradcheck import check_gradients
from lgrln.numerics.tensor import Tensor

CFG = GbtConfig(tau1=0.5, tau2=0.9, alpha1=0.7, alpha2=0.3, hidden_dim=4)


def _isolated(n: int) -> Adjacency:
    return Adjacency.from_neighbor_lists([[] for _ in range(n)])


def test_aggregate_example():
    """Test the three weight classes on one node."""
    h = Tensor([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.8, 0.6]])
    adjacency = Adjacency.from_neighbor_lists([[1, 2, 3], [], [], []])
    m = aggregate(h, adjacency, CFG).data
    assert np.allclose(m[0], [0.94, 0.18], atol=1e-12, rtol=0)
    assert np.array_equal(m[1:], np.zeros((3, 2)))


def test_aggregate_forced_branch():
    """Test identical neighbours take alpha1."""
    h = Tensor([[0.3, -0.4], [0.3, -0.4]])
    m = aggregate(h, Adjacency.from_neighbor_lists([[1], []]), CFG).data
    assert np.allclose(m[0], 0.7 * h.data[1])


def test_boundary_cosines_take_alpha2():
    """Test values exactly at a threshold fall to the middle class."""
    weights = bi_threshold_weights(np.array([0.5, 0.9, 0.49, 0.91]), CFG)
    assert weights.tolist() == [0.3, 0.3, 0.0, 0.7]


def test_weight_classes_match_brute_force():
    """Test messages on random graphs against per-edge classification of cosines."""
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 31))
        density = rng.uniform(0.05, 0.6)
        neighbors = [[j for j in range(n) if j != i and rng.random() < density] for i in range(n)]
        adjacency = Adjacency.from_neighbor_lists(neighbors)
        h = rng.normal(size=(n, 3))
        m = aggregate(Tensor(h), adjacency, CFG).data

        expected = np.zeros_like(h)
        for t, nbrs in enumerate(neighbors):
            for s in nbrs:
                c = h[t] @ h[s] / (np.linalg.norm(h[t]) * np.linalg.norm(h[s]))
                alpha = 0.0 if c < 0.5 else (0.7 if c > 0.9 else 0.3)
                expected[t] += alpha * h[s]
        assert np.allclose(m, expected, rtol=0.0, atol=1e-10)


def test_degenerates_to_sum():
    """Test equal weights with the lowest threshold give a scaled sum."""
    rng = np.random.default_rng(1)
    h = rng.normal(size=(6, 3))
    adjacency = build_graphs(6, fps=1.0, tau=2.5).adjacency("forward")
    flat = GbtConfig(tau1=-1.0, tau2=1.0, alpha1=0.5, alpha2=0.5 - 1e-12)
    m = aggregate(Tensor(h), adjacency, flat).data

    expected = np.zeros_like(h)
    for i, nbrs in enumerate(adjacency.neighbor_lists()):
        for j in nbrs:
            expected[i] += 0.5 * h[j]
    assert np.allclose(m, expected, atol=1e-9)

    summed = aggregate(Tensor(h), adjacency, GbtConfig(aggregation=AggregationMode.SUM)).data
    assert np.allclose(summed, 2.0 * expected, atol=1e-9)


def test_graph_norm_cases():
    """Test graph normalization special cases and a two-pass oracle."""
    params = init_graph_norm(3, "n")
    params.beta.data[:] = [0.1, 0.2, 0.3]
    single = graph_norm(Tensor([[4.0, -2.0, 7.0]]), params).data
    assert np.allclose(single, [[0.1, 0.2, 0.3]])

    rms = init_graph_norm(3, "n")
    rms.alpha.data[:] = 0.0
    x = np.random.default_rng(2).normal(size=(5, 3))
    out = graph_norm(Tensor(x), rms).data
    assert np.allclose(out, x / np.sqrt((x**2).mean(axis=0) + 1e-5), atol=1e-12)

    rng = np.random.default_rng(3)
    full = init_graph_norm(3, "n")
    full.alpha.data[:] = rng.uniform(0.0, 1.5, size=3)
    full.gamma.data[:] = rng.normal(size=3)
    full.beta.data[:] = rng.normal(size=3)
    x = rng.normal(size=(5, 3))
    mu = x.sum(axis=0) / 5
    centred = x - full.alpha.data * mu
    var = (centred**2).sum(axis=0) / 5
    expected = full.gamma.data * centred / np.sqrt(var + 1e-5) + full.beta.data
    assert np.allclose(graph_norm(Tensor(x), full).data, expected, atol=1e-10, rtol=0)


def test_isolated_layer_is_graph_norm():
    """Test zero messages reduce the layer to normalization of h."""
    rng = np.random.default_rng(4)
    params = init_layer(rng, 4, "l")
    h = Tensor(rng.normal(size=(5, 4)))
    out = gbt_layer(h, _isolated(5), params, CFG).data
    assert np.allclose(out, graph_norm(h, params.norm).data, atol=1e-15)


def test_residual_with_zero_w2():
    """Test the pre-normalization value is h + b2 when W2 is zero."""
    rng = np.random.default_rng(5)
    params = init_layer(rng, 4, "l")
    params.W2.data[:] = 0.0
    params.b2.data[:] = rng.normal(size=4)
    h = Tensor(rng.normal(size=(5, 4)))
    message = Tensor(rng.normal(size=(5, 4)))
    out = iteration(h, message, params, 0.0, False, None).data
    assert np.allclose(out, graph_norm(Tensor(h.data + params.b2.data), params.norm).data, atol=1e-15)


def test_layer_gradients():
    """Test layer gradients against finite differences."""
    rng = np.random.default_rng(6)
    adjacency = build_graphs(6, fps=1.0, tau=2.5).adjacency("undirected")
    for _ in range(5):
        params = init_layer(rng, 4, "l")
        params.b1.data[:] = rng.normal(size=4) * 0.1
        params.b2.data[:] = rng.normal(size=4) * 0.1
        h = Tensor(rng.normal(size=(6, 4)), requires_grad=True, name="h")
        r = Tensor(rng.normal(size=(6, 4)))
        # Weights are frozen at the unperturbed features.
        matrix = aggregation_matrix(h.data.copy(), adjacency, CFG)

        def fn():
            message = ops.sparse_matmul(matrix, h)
            return ops.sum(iteration(h, message, params, 0.0, False, None) * r)

        wrt = [params.W1, params.b1, params.W2, params.b2, h]
        result = check_gradients(fn, wrt)
        assert result.passed, result.errors

        fixed = Tensor(h.data.copy())
        result = check_gradients(
            lambda: ops.sum(gbt_layer(fixed, adjacency, params, CFG) * r),
            [params.W1, params.b1, params.W2, params.b2, params.norm.gamma],
        )
        assert result.passed, result.errors


def test_layer_permutation_equivariance():
    """Test relabeling nodes and edges relabels the output."""
    rng = np.random.default_rng(7)
    params = init_layer(rng, 4, "l")
    h = rng.normal(size=(7, 4))
    neighbors = [[1, 2], [0, 3], [0, 4], [1, 5], [2, 6], [3], [4]]
    perm = rng.permutation(7)
    inverse = np.argsort(perm)
    permuted_neighbors = [[int(inverse[j]) for j in neighbors[perm[i]]] for i in range(7)]

    out = gbt_layer(Tensor(h), Adjacency.from_neighbor_lists(neighbors), params, CFG).data
    permuted = gbt_layer(
        Tensor(h[perm]), Adjacency.from_neighbor_lists(permuted_neighbors), params, CFG
    ).data
    assert np.allclose(permuted, out[perm], atol=1e-12)


def test_dropout_only_in_training():
    """Test evaluation is deterministic and training draws masks."""
    rng = np.random.default_rng(8)
    params = init_layer(rng, 4, "l")
    params.b1.data[:] = 1.0
    h = Tensor(rng.normal(size=(6, 4)))
    adjacency = build_graphs(6, fps=1.0, tau=2.5).adjacency("forward")
    first = gbt_layer(h, adjacency, params, CFG).data
    assert np.array_equal(first, gbt_layer(h, adjacency, params, CFG).data)

    a = gbt_layer(h, adjacency, params, CFG, training=True, rng=np.random.default_rng(0)).data
    b = gbt_layer(h, adjacency, params, CFG, training=True, rng=np.random.default_rng(1)).data
    assert not np.array_equal(a, b)
    with pytest.raises(ValueError):
        gbt_layer(h, adjacency, params, CFG, training=True)


def test_time_embedding():
    """Test lookups, shared positions and capacity."""
    cfg = GbtConfig(time_embed_layers=[0], max_positions=8)
    h = Tensor(np.random.default_rng(9).normal(size=(3, 4)))
    zero = Tensor(np.zeros((8, 4)))
    assert np.array_equal(add_time_embedding(h, np.arange(3), zero, 0, cfg).data, h.data)

    table = Tensor(sinusoidal_table(8, 4))
    out = add_time_embedding(Tensor(np.zeros((3, 4))), np.array([5, 5, 1]), table, 0, cfg).data
    assert np.array_equal(out[0], out[1])
    assert np.array_equal(out[2], table.data[1])

    with pytest.raises(CapacityError, match="position 8 .*max_positions=8"):
        add_time_embedding(h, np.array([0, 1, 8]), table, 0, cfg)
    with pytest.raises(CapacityError, match="position -3 "):
        add_time_embedding(h, np.array([2, -3, 9]), table, 0, cfg)
    with pytest.raises(ValueError):
        add_time_embedding(h, np.arange(3), table, 1, cfg)


def test_time_embedding_gradient_counts_rows():
    """Test repeated positions accumulate upstream gradient."""
    cfg = GbtConfig(time_embed_layers=[0], max_positions=5)
    table = Tensor(np.random.default_rng(10).normal(size=(5, 2)), requires_grad=True, name="table")
    h = Tensor(np.zeros((4, 2)))
    positions = np.array([0, 3, 3, 3])
    result = check_gradients(lambda: ops.sum(add_time_embedding(h, positions, table, 0, cfg)), [table])
    assert result.passed


def test_sinusoidal_table():
    """Test the initial position table."""
    table = sinusoidal_table(10, 6)
    assert table.shape == (10, 6)
    assert np.array_equal(table[0, 0::2], np.zeros(3))
    assert np.array_equal(table[0, 1::2], np.ones(3))
    assert np.all(np.abs(table) <= 1.0)


def test_score_branches():
    """Test head output and branch handling."""
    head = HeadParams(W=Tensor(np.zeros((4, 1))), b=Tensor([0.0]))
    zero = Tensor(np.zeros((5, 4)))
    logits, probs = score_branches([zero, zero, zero], head)
    assert logits.shape == (5,)
    assert np.array_equal(probs.data, np.full(5, 0.5))

    rng = np.random.default_rng(11)
    head = HeadParams(W=Tensor(rng.normal(size=(4, 1))), b=Tensor([0.2]))
    outs = [Tensor(rng.normal(size=(5, 4))) for _ in range(3)]
    _, p = score_branches(outs, head)
    _, p_rev = score_branches(outs[::-1], head)
    assert np.allclose(p.data, p_rev.data, atol=1e-15)
    assert np.all((p.data > 0) & (p.data < 1))

    perm = rng.permutation(5)
    _, p_perm = score_branches([Tensor(o.data[perm]) for o in outs], head)
    assert np.allclose(p_perm.data, p.data[perm], atol=1e-15)

    with pytest.raises(DimensionError):
        score_branches([outs[0], Tensor(np.zeros((4, 4)))], head)
    with pytest.raises(DimensionError):
        score_branches([], head)
