#!/usr/bin/env python3

"""
File: test_metrics.py

Tests for AUC, the overfit gap and the cross-iteration summaries.
The AUC is checked against brute-force counting over all positive/negative pairs.
"""

import logging

import numpy as np
import pytest

from prepbench import metrics
from prepbench.errors import ArgumentError, UndefinedMetricError


logger = logging.getLogger(__name__)


def pair_count_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    positives = scores[labels == 1]
    negatives = scores[labels == 0]
    wins = 0.0
    for p in positives:
        for n in negatives:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(positives) * len(negatives))


@pytest.mark.metrics
def test_auc_perfect_order():
    assert metrics.auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert metrics.auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


@pytest.mark.metrics
def test_auc_all_ties_is_one_half():
    assert metrics.auc(np.full(10, 0.3), [0, 1] * 5) == 0.5


@pytest.mark.metrics
def test_auc_eight_rows_matches_pair_count():
    scores = np.array([0.3, 0.7, 0.7, 0.1, 0.5, 0.9, 0.5, 0.2])
    labels = np.array([0, 1, 0, 0, 1, 1, 0, 1])
    assert metrics.auc(scores, labels) == pair_count_auc(scores, labels)


@pytest.mark.metrics
def test_auc_matches_pair_count_on_random_cases(rng):
    for case in range(200):
        labels = rng.integers(0, 2, size=20)
        labels[:2] = (0, 1)
        # Rounded scores produce plenty of ties
        scores = np.round(rng.random(20), 1)
        assert metrics.auc(scores, labels) == pytest.approx(pair_count_auc(scores, labels), abs=1e-12), case


@pytest.mark.metrics
def test_auc_is_invariant_under_increasing_transforms(rng):
    scores = rng.normal(size=300)
    labels = (rng.random(300) < 0.5).astype(int)
    assert metrics.auc(np.exp(scores), labels) == pytest.approx(metrics.auc(scores, labels))
    assert metrics.auc(3 * scores + 7, labels) == pytest.approx(metrics.auc(scores, labels))


@pytest.mark.metrics
def test_auc_of_negated_scores_complements(rng):
    scores = rng.normal(size=100)
    labels = (rng.random(100) < 0.4).astype(int)
    labels[:2] = (0, 1)
    assert metrics.auc(scores, labels) + metrics.auc(-scores, labels) == pytest.approx(1.0)


@pytest.mark.metrics
def test_auc_rejects_single_class_and_shape_mismatch():
    with pytest.raises(UndefinedMetricError):
        metrics.auc([0.1, 0.2, 0.3], [1, 1, 1])
    with pytest.raises(UndefinedMetricError):
        metrics.auc([0.1, 0.2], [0, 1, 1])


@pytest.mark.metrics
def test_auc_gap():
    assert metrics.auc_gap(0.8, 0.8) == 0.0
    assert metrics.auc_gap(0.99, 0.90) == pytest.approx(0.09)


@pytest.mark.metrics
def test_summarize_two_values():
    band = metrics.summarize([0.8, 0.9])
    assert band.mean == pytest.approx(0.85)
    assert band.std == pytest.approx(0.0707107, abs=1e-6)
    assert band.lower == pytest.approx(0.7085786, abs=1e-6)
    assert band.upper == pytest.approx(0.9914214, abs=1e-6)
    assert band.n == 2


@pytest.mark.metrics
def test_summarize_degenerate_bands():
    constant = metrics.summarize([0.7, 0.7, 0.7])
    assert constant.std == 0.0
    assert constant.lower == constant.mean == constant.upper
    single = metrics.summarize([0.61])
    assert (single.lower, single.mean, single.upper, single.std) == (0.61, 0.61, 0.61, 0.0)
    with pytest.raises(ArgumentError):
        metrics.summarize([])


@pytest.mark.metrics
def test_summarize_is_permutation_invariant(rng):
    values = rng.random(12)
    first = metrics.summarize(values)
    second = metrics.summarize(values[::-1])
    assert first.mean == pytest.approx(second.mean)
    assert first.std == pytest.approx(second.std)
    assert first.lower <= first.mean <= first.upper


@pytest.mark.metrics
def test_average_rank():
    np.testing.assert_array_equal(metrics.average_rank([[1, 2, 3], [1, 2, 3]]), [1, 2, 3])
    np.testing.assert_array_equal(metrics.average_rank([[1, 2, 3], [3, 2, 1]]), [2, 2, 2])
    with pytest.raises(ArgumentError):
        metrics.average_rank([[1, 2], [1, 2, 3]])
    with pytest.raises(ArgumentError):
        metrics.average_rank([])
