#!/usr/bin/env python3

"""
File: test_nullimp.py

Tests for the missing-value imputers. The simple fills are checked on the shared toy table, the
label-aware fills on tables built so that the chosen bin or leaf is known in advance.
"""

import logging

import numpy as np
import pytest

from prepbench import nullimp
from prepbench.errors import ArgumentError, FitError, NotFittedError, SchemaError
from prepbench.nullimp import ImputationMethod


logger = logging.getLogger(__name__)


def decile_problem(missing_rate: float, n_missing: int = 20):
    """Values 0..99 in ten bins of ten; bin b holds b positives. Missing rows are appended at the end."""
    values = np.arange(100, dtype=float)
    labels = np.zeros(100)
    for b in range(10):
        labels[10 * b:10 * b + b] = 1.0
    missing_labels = (np.arange(n_missing) < round(missing_rate * n_missing)).astype(float)
    table = np.concatenate([values, np.full(n_missing, np.nan)]).reshape(-1, 1)
    return table, np.concatenate([labels, missing_labels])


@pytest.mark.nullimp
def test_mean_fill(imputation_toy):
    filled = nullimp.make_imputer("mean").fit_transform(imputation_toy)
    assert filled[3, 0] == filled[5, 0] == 187.5
    assert filled[0, 1] == pytest.approx(0.52, abs=1e-12)


@pytest.mark.nullimp
def test_median_fill(imputation_toy):
    filled = nullimp.make_imputer(ImputationMethod.MEDIAN).fit_transform(imputation_toy)
    assert filled[3, 0] == filled[5, 0] == 175.0
    assert filled[0, 1] == 0.60


@pytest.mark.nullimp
def test_mean_and_median_fills_minimize_their_deviations(rng):
    table = rng.exponential(scale=2.0, size=(200, 3))
    table[rng.random(table.shape) < 0.2] = np.nan
    mean_fills = nullimp.make_imputer("mean").fit(table).state.fill_values
    median_fills = nullimp.make_imputer("median").fit(table).state.fill_values
    for j in range(table.shape[1]):
        observed = table[~np.isnan(table[:, j]), j]
        for step in (-1.0, -0.1, -1e-3, 1e-3, 0.1, 1.0):
            assert ((observed - mean_fills[j]) ** 2).sum() <= ((observed - mean_fills[j] - step) ** 2).sum() + 1e-9
            assert np.abs(observed - median_fills[j]).sum() <= np.abs(observed - median_fills[j] - step).sum() + 1e-9


@pytest.mark.nullimp
def test_missing_indicator(imputation_toy):
    imputer = nullimp.make_imputer("indicator")
    out = imputer.fit_transform(imputation_toy)
    assert out.shape == (6, 4)
    assert out[3, 0] == out[5, 0] == out[0, 1] == -9999.0
    np.testing.assert_array_equal(out[:, 2], [0, 0, 0, 1, 0, 1])
    np.testing.assert_array_equal(out[:, 3], [1, 0, 0, 0, 0, 0])
    assert imputer.output_names(["f1", "f2"]) == ["f1", "f2", "f1__missing", "f2__missing"]


@pytest.mark.nullimp
def test_indicator_columns_follow_fit_time_missingness(imputation_toy):
    train = imputation_toy.copy()
    train[:, 1] = 0.5
    imputer = nullimp.make_imputer("indicator").fit(train)
    out = imputer.transform(imputation_toy)
    # Feature 2 had nothing missing at fit time, so no flag column; its missing cell still gets the sentinel
    assert out.shape == (6, 3)
    assert out[0, 1] == -9999.0


@pytest.mark.nullimp
def test_indicator_sentinel_inside_range():
    with pytest.raises(FitError):
        nullimp.make_imputer("indicator", sentinel=0.5).fit(np.array([[0.0], [1.0], [np.nan]]))


@pytest.mark.nullimp
def test_cluster_fill(imputation_toy, imputation_toy_clusters):
    filled = nullimp.fill_from_clusters(imputation_toy, None, imputation_toy_clusters - 1)
    assert filled[0, 1] == pytest.approx(0.725, abs=1e-12)
    assert filled[3, 0] == 175.0
    assert filled[5, 0] == 200.0
    observed = ~np.isnan(imputation_toy)
    np.testing.assert_array_equal(filled[observed], imputation_toy[observed])


@pytest.mark.nullimp
def test_cluster_fill_falls_back_to_global_mean():
    table = np.array([[1.0], [np.nan], [3.0], [np.nan]])
    filled = nullimp.fill_from_clusters(table, None, np.array([0, 1, 0, 1]))
    assert filled[1, 0] == filled[3, 0] == 2.0


@pytest.mark.nullimp
def test_mask_and_nan_are_equivalent(imputation_toy):
    mask = np.isnan(imputation_toy)
    hidden = np.where(mask, 123.0, imputation_toy)
    for method in ("mean", "median", "indicator"):
        np.testing.assert_array_equal(nullimp.make_imputer(method).fit_transform(hidden, mask),
                                      nullimp.make_imputer(method).fit_transform(imputation_toy))


@pytest.mark.nullimp
def test_decile_fill_picks_the_matching_bin():
    table, labels = decile_problem(0.3)
    imputer = nullimp.make_imputer("decile").fit(table, labels=labels)
    assert imputer.state.fill_values == (34.5,)
    assert imputer.state.details["sources"] == ["decile_3"]
    assert nullimp.make_imputer("decile", statistic="mean").fit(table, labels=labels).state.fill_values == (34.5,)


@pytest.mark.nullimp
def test_decile_ties_go_to_the_lower_bin():
    table, labels = decile_problem(0.35)
    imputer = nullimp.make_imputer("decile").fit(table, labels=labels)
    assert imputer.state.details["sources"] == ["decile_3"]


@pytest.mark.nullimp
def test_decile_fill_on_a_forty_row_table():
    # Values 1..30 make ten bins of three; only bin 3 (values 10, 11, 12) has the missing rows' rate of 1/3
    values = np.arange(1.0, 31.0)
    positives_per_bin = [0, 0, 0, 1, 2, 2, 2, 3, 3, 3]
    labels = np.concatenate([[1.0] * n + [0.0] * (3 - n) for n in positives_per_bin])
    missing_labels = np.array([1.0, 1.0, 1.0] + [0.0] * 7)
    table = np.concatenate([values, np.full(10, np.nan)]).reshape(-1, 1)
    labels = np.concatenate([labels, missing_labels])
    assert table.shape == (40, 1)
    imputer = nullimp.make_imputer("decile").fit(table, labels=labels)
    assert imputer.state.fill_values == (11.0,)
    assert imputer.state.details["sources"] == ["decile_3"]
    assert nullimp.make_imputer("decile", statistic="mean").fit(table, labels=labels).state.fill_values == (11.0,)


@pytest.mark.nullimp
def test_decile_bins_drop_repeated_edges():
    bins = nullimp.decile_bins(np.array([0.0] * 50 + list(range(1, 51))))
    assert bins.min() == 0
    assert np.array_equal(np.unique(bins), np.arange(bins.max() + 1))
    assert bins.max() < 9


@pytest.mark.nullimp
def test_decile_needs_labels(imputation_toy):
    with pytest.raises(FitError):
        nullimp.make_imputer("decile").fit(imputation_toy)
    with pytest.raises(ArgumentError):
        nullimp.make_imputer("decile", statistic="mode")


@pytest.mark.nullimp
def test_kmeans_separates_blobs(rng):
    centers = np.array([[0.0, 0.0], [10.0, 10.0], [-10.0, 10.0]])
    points = np.vstack([center + rng.normal(scale=0.5, size=(50, 2)) for center in centers])
    result = nullimp.kmeans(points, 3, np.random.default_rng(0))
    for block in range(3):
        assert len(set(result.assignments[50 * block:50 * (block + 1)])) == 1
    assert len(set(result.assignments)) == 3
    assert np.all(np.diff(result.inertia) <= 1e-9)
    with pytest.raises(ArgumentError):
        nullimp.kmeans(points, 0, np.random.default_rng(0))


@pytest.mark.nullimp
def test_kmeans_single_cluster_centroid_is_the_column_means(rng):
    points = rng.normal(loc=[1.0, -2.0, 5.0], size=(50, 3))
    result = nullimp.kmeans(points, 1, np.random.default_rng(0))
    np.testing.assert_allclose(result.centroids[0], points.mean(axis=0), atol=1e-12)
    assert np.all(result.assignments == 0)


@pytest.mark.nullimp
def test_empty_clusters_are_reseeded_at_distinct_rows():
    points = np.array([[0.0], [1.0], [2.0], [10.0], [20.0]])
    centroids = np.zeros((3, 1))
    rows = nullimp.reseed_empty_clusters(points, centroids, np.array([0.0, 1.0, 4.0, 100.0, 400.0]), [1, 2])
    assert rows == [4, 3]
    assert centroids[1, 0] == 20.0
    assert centroids[2, 0] == 10.0

    # Every row already sits on its centroid: still one row per empty cluster
    rows = nullimp.reseed_empty_clusters(np.zeros((4, 1)), np.ones((3, 1)), np.zeros(4), [0, 1, 2])
    assert rows == [0, 1, 2]


@pytest.mark.nullimp
def test_kmeans_with_more_clusters_than_locations():
    locations = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
    points = np.repeat(locations, 4, axis=0)
    result = nullimp.kmeans(points, 5, np.random.default_rng(3))
    assert result.inertia[-1] == 0.0
    for centroid in result.centroids:
        assert any(np.array_equal(centroid, location) for location in locations)
    assert len(set(result.assignments)) == 3


@pytest.mark.nullimp
def test_cluster_imputer_fills_with_cluster_means(rng):
    table = np.vstack([rng.normal(loc=0.0, size=(60, 3)), rng.normal(loc=8.0, size=(60, 3))])
    mask = rng.random(table.shape) < 0.1
    imputer = nullimp.make_imputer("cluster", k=2, seed=4)
    filled = imputer.fit_transform(table, mask)
    np.testing.assert_array_equal(filled[~mask], table[~mask])
    clusters = imputer.assign(table, mask)
    for row, column in zip(*np.nonzero(mask)):
        assert filled[row, column] == imputer.cluster_fills[clusters[row], column]
    again = nullimp.make_imputer("cluster", k=2, seed=4).fit_transform(table, mask)
    np.testing.assert_array_equal(filled, again)


@pytest.mark.nullimp
def test_welch_t():
    assert nullimp.welch_t([1, 2, 3], [4, 5, 6]) == pytest.approx(-3.6742346, abs=1e-6)
    assert nullimp.welch_t([2, 2], [2, 2, 2]) == 0.0


@pytest.mark.nullimp
def test_tree_imputer_fill_is_an_observed_leaf_median(rng):
    values = rng.normal(size=500)
    labels = (values + rng.normal(scale=0.5, size=500) > 0).astype(float)
    table = values.reshape(-1, 1).copy()
    mask = np.zeros_like(table, dtype=bool)
    mask[:80, 0] = True
    imputer = nullimp.make_imputer("tree").fit(table, mask, labels)
    fill = imputer.state.fill_values[0]
    assert values[80:].min() <= fill <= values[80:].max()
    assert imputer.state.details["leaves"][0] > 1
    filled = imputer.transform(table, mask)
    assert np.all(filled[:80, 0] == fill)
    np.testing.assert_array_equal(filled[80:], table[80:])


def bimodal_problem(rng: np.random.Generator):
    """
    500 rows around -3 with label rate 0.1, 300 rows around +3 with label rate 0.7, then 100 missing rows
    with label rate 0.7.
    """
    lower = rng.normal(loc=-3.0, scale=0.5, size=500)
    upper = rng.normal(loc=3.0, scale=0.5, size=300)
    lower_labels = rng.permutation(np.repeat([1.0, 0.0], [50, 450]))
    upper_labels = rng.permutation(np.repeat([1.0, 0.0], [210, 90]))
    missing_labels = rng.permutation(np.repeat([1.0, 0.0], [70, 30]))
    table = np.concatenate([lower, upper, np.full(100, np.nan)]).reshape(-1, 1)
    return table, np.concatenate([lower_labels, upper_labels, missing_labels]), upper


@pytest.mark.nullimp
def test_tree_fill_comes_from_the_mode_with_the_matching_rate(rng):
    table, labels, upper = bimodal_problem(rng)
    stump = nullimp.make_imputer("tree", max_depth=1).fit(table, labels=labels)
    assert stump.state.details["leaves"] == [2]
    assert stump.state.fill_values[0] == pytest.approx(float(np.median(upper)), abs=1e-12)
    fill = nullimp.make_imputer("tree").fit(table, labels=labels).state.fill_values[0]
    assert upper.min() <= fill <= upper.max()


@pytest.mark.nullimp
def test_tree_fills_vary_more_than_mean_and_median_fills(rng):
    table, labels, _ = bimodal_problem(rng)
    fills = {"tree": [], "mean": [], "median": []}
    for _ in range(30):
        rows = rng.integers(table.shape[0], size=table.shape[0])
        for method in fills:
            imputer = nullimp.make_imputer(method).fit(table[rows], labels=labels[rows])
            fills[method].append(imputer.state.fill_values[0])
    variances = {method: float(np.var(values)) for method, values in fills.items()}
    logger.info(f"Bootstrap fill variances: {variances}")
    assert variances["tree"] > variances["mean"]
    assert variances["tree"] > variances["median"]


@pytest.mark.nullimp
@pytest.mark.parametrize("method", list(ImputationMethod))
def test_complete_columns_pass_through(method, rng):
    table = rng.normal(size=(100, 2))
    table[:10, 0] = np.nan
    labels = (rng.random(100) < 0.5).astype(float)
    imputer = nullimp.make_imputer(method).fit(table, labels=labels)
    out = imputer.transform(table)
    np.testing.assert_array_equal(out[:, 1], table[:, 1])
    np.testing.assert_array_equal(out[10:, 0], table[10:, 0])
    assert not np.isnan(out).any()


@pytest.mark.nullimp
def test_imputer_errors(imputation_toy):
    with pytest.raises(ArgumentError):
        nullimp.make_imputer("knn")
    with pytest.raises(NotFittedError):
        nullimp.make_imputer("mean").transform(imputation_toy)
    with pytest.raises(FitError):
        nullimp.make_imputer("mean").fit(np.array([[np.nan, 1.0], [np.nan, 2.0]]))
    imputer = nullimp.make_imputer("mean").fit(imputation_toy)
    with pytest.raises(SchemaError):
        imputer.transform(imputation_toy[:, :1])
    with pytest.raises(SchemaError):
        imputer.transform(imputation_toy, np.zeros((6, 3), dtype=bool))
