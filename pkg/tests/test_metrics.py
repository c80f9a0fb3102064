"""Tests for evaluation metrics."""

import numpy as np
import pytest

from lgrln.errors import DimensionError, UndefinedCorrelationError
from lgrln.evaluation.metrics import (
    VideoMetrics,
    aggregate_metrics,
    evaluate_video,
    f1,
    f1_multi,
    kendall_tau,
    spearman_rho,
)


def _mask(n: int, frames) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[list(frames)] = True
    return mask


def _tau_b(x, y):
    i, j = np.triu_indices(len(x), k=1)
    dx, dy = np.sign(x[i] - x[j]), np.sign(y[i] - y[j])
    concordant = np.sum(dx * dy > 0)
    discordant = np.sum(dx * dy < 0)
    ties_x = np.sum((dx == 0) & (dy != 0))
    ties_y = np.sum((dy == 0) & (dx != 0))
    return (concordant - discordant) / np.sqrt(
        (concordant + discordant + ties_x) * (concordant + discordant + ties_y)
    )


def _average_ranks(x):
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def test_f1_cases():
    """Test identical, overlapping and disjoint masks."""
    gt = _mask(6, [1, 2, 3])
    assert f1(gt, gt) == (1.0, 1.0, 1.0)
    p, r, score = f1(_mask(6, [2, 3, 4]), gt)
    assert (p, r, score) == pytest.approx((2 / 3, 2 / 3, 2 / 3))
    assert f1(_mask(6, [0, 5]), gt)[2] == 0.0


def test_f1_empty_conventions():
    """Test empty masks."""
    gt = _mask(5, [1])
    assert f1(np.zeros(5, dtype=bool), gt) == (0.0, 0.0, 0.0)
    assert f1(gt, np.zeros(5, dtype=bool)) == (0.0, 0.0, 0.0)
    with pytest.raises(DimensionError):
        f1(np.zeros(4, dtype=bool), gt)


def test_f1_asymmetry():
    """Test precision and recall swap when masks differ in size."""
    small, large = _mask(10, [1, 2]), _mask(10, [1, 2, 3, 4])
    p, r, _ = f1(small, large)
    assert (p, r) == (1.0, 0.5)
    p, r, _ = f1(large, small)
    assert (p, r) == (0.5, 1.0)


def test_f1_multi():
    """Test max and mean reductions."""
    pred = _mask(6, [0, 1])
    assert f1_multi(pred, pred[None, :]) == (1.0, 1.0)
    assert f1_multi(pred, np.stack([pred, _mask(6, [4, 5])])) == (1.0, 0.5)

    rng = np.random.default_rng(0)
    for _ in range(10):
        pred = rng.random(20) < 0.3
        annotations = rng.random((3, 20)) < 0.3
        scores = [f1(pred, a)[2] for a in annotations]
        f1_max, f1_mean = f1_multi(pred, annotations)
        assert f1_max == pytest.approx(max(scores))
        assert f1_mean == pytest.approx(sum(scores) / 3)
        assert f1_mean <= f1_max


def test_perfect_correlations():
    """Test identical and reversed rankings."""
    x = np.array([0.3, 1.2, -0.5, 4.0, 2.2])
    assert kendall_tau(x, x) == pytest.approx(1.0)
    assert spearman_rho(x, x) == pytest.approx(1.0)
    y = -x
    assert kendall_tau(x, y) == pytest.approx(-1.0)
    assert spearman_rho(x, y) == pytest.approx(-1.0)


def test_correlations_match_oracles():
    """Test against pair counting and rank-then-Pearson on tied and continuous vectors."""
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 1000:
        n = int(rng.integers(2, 51))
        if checked % 2 == 0:
            x = rng.integers(0, 6, size=n).astype(float)
            y = rng.integers(0, 6, size=n).astype(float)
        else:
            x, y = rng.normal(size=n), rng.normal(size=n)
        if np.ptp(x) == 0 or np.ptp(y) == 0:
            continue
        assert kendall_tau(x, y) == pytest.approx(_tau_b(x, y), abs=1e-12)
        rx, ry = _average_ranks(x), _average_ranks(y)
        assert spearman_rho(x, y) == pytest.approx(np.corrcoef(rx, ry)[0, 1], abs=1e-12)
        checked += 1


def test_correlations_invariant_to_monotone_maps():
    """Test strictly increasing transforms leave correlations unchanged."""
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert kendall_tau(np.exp(x), y**3) == pytest.approx(kendall_tau(x, y), abs=1e-12)
    assert spearman_rho(np.exp(x), y**3) == pytest.approx(spearman_rho(x, y), abs=1e-12)
    assert -1.0 <= kendall_tau(x, y) <= 1.0


def test_correlation_errors():
    """Test constant vectors and short inputs."""
    with pytest.raises(UndefinedCorrelationError):
        kendall_tau([1.0, 1.0, 1.0], [0.1, 0.2, 0.3])
    with pytest.raises(UndefinedCorrelationError):
        spearman_rho([0.1, 0.2, 0.3], [2.0, 2.0, 2.0])
    with pytest.raises(DimensionError):
        kendall_tau([1.0], [2.0])
    with pytest.raises(DimensionError):
        spearman_rho([1.0, 2.0], [1.0, 2.0, 3.0])


def test_evaluate_video():
    """Test per-video rows with and without importance scores."""
    labels = np.array([[1, 1, 0, 0, 0], [0, 1, 1, 0, 0]], dtype=np.uint8)
    probabilities = np.array([0.9, 0.8, 0.4, 0.2, 0.1])
    pred = np.array([True, True, False, False, False])
    row = evaluate_video("v", probabilities, pred, labels)
    assert row.f1_max == 1.0
    assert row.f1_mean == pytest.approx(0.75)
    assert row.tau is not None and row.rho is not None

    importance = np.tile(np.array([0.5, 0.4, 0.3, 0.2, 0.1]), (2, 1))
    assert evaluate_video("v", probabilities, pred, labels, importance).tau == pytest.approx(1.0)

    flat = evaluate_video("v", np.full(5, 0.5), pred, labels)
    assert flat.tau is None and flat.rho is None


def test_aggregate_metrics():
    """Test averaging skips undefined correlations."""
    rows = [
        VideoMetrics(video_id="a", f1_max=0.6, f1_mean=0.4, tau=0.2, rho=0.3),
        VideoMetrics(video_id="b", f1_max=0.8, f1_mean=0.6),
    ]
    summary = aggregate_metrics(rows)
    assert summary.f1_max == pytest.approx(0.7)
    assert summary.f1_mean == pytest.approx(0.5)
    assert summary.tau == pytest.approx(0.2)
    assert summary.as_dict()["rho"] == pytest.approx(0.3)
    assert aggregate_metrics([]).tau is None
