# nullimp.py


"""
Missing-value imputers: mean, median, missing indicator, decile, cluster and tree.

Each imputer is fitted on a training table and fills masked cells of any table with the same columns.
A cell is missing when it is NaN or flagged in the optional mask. Cells that are not missing are never
modified. Decile and tree imputation look at the labels during fit; the others do not.
"""


import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Type

import numpy as np
from sklearn.tree import DecisionTreeRegressor

from prepbench.errors import ArgumentError, FitError, SchemaError, check_fitted


logger = logging.getLogger(__name__)

DEFAULT_SENTINEL = -9999.0
N_DECILES = 10
KMEANS_MAX_ITER = 300


class ImputationMethod(str, Enum):
    MEAN = "mean"
    MEDIAN = "median"
    INDICATOR = "indicator"
    DECILE = "decile"
    CLUSTER = "cluster"
    TREE = "tree"


@dataclass(frozen=True)
class ImputerState:
    """Fitted parameters of an imputer, JSON-friendly through `to_dict`."""
    method: ImputationMethod
    fill_values: Tuple[float, ...]
    sentinel: Optional[float] = None
    k: Optional[int] = None
    indicator_features: Tuple[int, ...] = ()
    details: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "fill_values": list(self.fill_values),
            "sentinel": self.sentinel,
            "k": self.k,
            "indicator_features": list(self.indicator_features),
            "details": dict(self.details),
        }


def missing_cells(features: np.ndarray, mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Float copy of the table and the union of its NaN cells with the given mask."""
    table = np.array(features, dtype=float)
    if table.ndim != 2:
        raise SchemaError(f"Expected a 2D table, got shape {table.shape}")
    missing = np.isnan(table)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != table.shape:
            raise SchemaError(f"Mask shape {mask.shape} differs from table shape {table.shape}")
        missing |= mask
    return table, missing


def _feature_name(feature_names: Optional[Sequence[str]], index: int) -> str:
    return feature_names[index] if feature_names is not None else f"feature {index}"


class Imputer(ABC):
    method: ImputationMethod
    needs_labels = False

    def __init__(self):
        self.state: Optional[ImputerState] = None
        self.n_features: Optional[int] = None

    @property
    def is_fitted(self) -> bool:
        return self.state is not None

    def fit(self, features: np.ndarray, mask: Optional[np.ndarray] = None, labels: Optional[np.ndarray] = None,
            feature_names: Optional[Sequence[str]] = None) -> "Imputer":
        table, missing = missing_cells(features, mask)
        if self.needs_labels:
            if labels is None:
                raise FitError(f"{self.method.value} imputation needs labels at fit time")
            labels = np.asarray(labels, dtype=float)
            if labels.shape != (table.shape[0],):
                raise FitError(f"Labels shape {labels.shape} does not match {table.shape[0]} rows")
        empty = np.flatnonzero(missing.all(axis=0))
        if empty.size:
            raise FitError(f"Cannot impute {_feature_name(feature_names, int(empty[0]))}: no observed training value")
        self.n_features = table.shape[1]
        self.state = self._fit(table, missing, labels)
        logger.debug(f"Fitted {self.method.value} imputer on {table.shape[0]}x{table.shape[1]}, "
                     f"{int(missing.sum())} missing cells")
        return self

    @abstractmethod
    def _fit(self, table: np.ndarray, missing: np.ndarray, labels: Optional[np.ndarray]) -> ImputerState:
        raise NotImplementedError

    def _fills(self, table: np.ndarray, missing: np.ndarray) -> np.ndarray:
        """Per-cell fill values for a table; only the masked cells are read."""
        return np.broadcast_to(np.asarray(self.state.fill_values), table.shape)

    @check_fitted
    def transform(self, features: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        table, missing = missing_cells(features, mask)
        if table.shape[1] != self.n_features:
            raise SchemaError(f"Imputer fitted on {self.n_features} features, got {table.shape[1]}")
        fills = self._fills(table, missing)
        table[missing] = fills[missing]
        return table

    def fit_transform(self, features: np.ndarray, mask: Optional[np.ndarray] = None,
                      labels: Optional[np.ndarray] = None, feature_names: Optional[Sequence[str]] = None) -> np.ndarray:
        return self.fit(features, mask, labels, feature_names).transform(features, mask)

    def output_names(self, feature_names: Sequence[str]) -> List[str]:
        return list(feature_names)


def _observed_medians(table: np.ndarray, missing: np.ndarray) -> np.ndarray:
    return np.array([np.median(table[~missing[:, j], j]) for j in range(table.shape[1])])


def _observed_means(table: np.ndarray, missing: np.ndarray) -> np.ndarray:
    return np.array([table[~missing[:, j], j].mean() for j in range(table.shape[1])])


class MeanImputer(Imputer):
    method = ImputationMethod.MEAN

    def _fit(self, table, missing, labels):
        return ImputerState(self.method, tuple(_observed_means(table, missing)))


class MedianImputer(Imputer):
    method = ImputationMethod.MEDIAN

    def _fit(self, table, missing, labels):
        return ImputerState(self.method, tuple(_observed_medians(table, missing)))


class MissingIndicatorImputer(Imputer):
    """
    Fills with a sentinel far outside the data and appends one 0/1 column per feature that had missing
    values at fit time.
    """
    method = ImputationMethod.INDICATOR

    def __init__(self, sentinel: float = DEFAULT_SENTINEL):
        super().__init__()
        self.sentinel = float(sentinel)

    def _fit(self, table, missing, labels):
        observed = table[~missing]
        if observed.size and observed.min() <= self.sentinel <= observed.max():
            raise FitError(f"Sentinel {self.sentinel} lies inside the observed range "
                           f"[{observed.min()}, {observed.max()}]")
        indicator_features = tuple(int(j) for j in np.flatnonzero(missing.any(axis=0)))
        return ImputerState(self.method, (self.sentinel,) * table.shape[1], sentinel=self.sentinel,
                            indicator_features=indicator_features)

    @check_fitted
    def transform(self, features: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        """Filled table followed by the indicator columns."""
        _, missing = missing_cells(features, mask)
        filled = super().transform(features, mask)
        indicators = missing[:, list(self.state.indicator_features)].astype(float)
        return np.hstack([filled, indicators])

    def output_names(self, feature_names: Sequence[str]) -> List[str]:
        return list(feature_names) + [f"{feature_names[j]}__missing" for j in self.state.indicator_features]


class DecileImputer(Imputer):
    """
    Splits the observed values of a feature into deciles, compares each decile's label rate with the label
    rate of the rows where the feature is missing, and fills with the median (or mean) value of the decile
    whose rate is closest. Ties go to the lower decile.
    """
    method = ImputationMethod.DECILE
    needs_labels = True

    def __init__(self, statistic: str = "median", n_bins: int = N_DECILES):
        super().__init__()
        if statistic not in ("median", "mean"):
            raise ArgumentError(f"Decile statistic must be 'median' or 'mean', got {statistic!r}")
        self.statistic = statistic
        self.n_bins = n_bins

    def _fit(self, table, missing, labels):
        fills, sources = [], []
        for j in range(table.shape[1]):
            observed = ~missing[:, j]
            values = table[observed, j]
            if observed.all():
                fills.append(float(np.median(values)))
                sources.append("pass_through")
            elif values.size < self.n_bins:
                fills.append(float(np.median(values)))
                sources.append("median_fallback")
            else:
                fill, chosen = decile_fill(values, labels[observed], labels[~observed], self.statistic, self.n_bins)
                fills.append(fill)
                sources.append(f"decile_{chosen}")
        return ImputerState(self.method, tuple(fills), details={"statistic": self.statistic, "sources": sources})


def decile_bins(values: np.ndarray, n_bins: int = N_DECILES) -> np.ndarray:
    """
    Bin of every value: quantile edges, bins closed on the left and open on the right (the top bin also holds
    the maximum). Bins emptied by repeated edges are dropped and the rest renumbered from 0.
    """
    edges = np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1))
    raw = np.searchsorted(edges[1:-1], values, side="right")
    _, renumbered = np.unique(raw, return_inverse=True)
    return renumbered


def decile_fill(values: np.ndarray, observed_labels: np.ndarray, missing_labels: np.ndarray,
                statistic: str = "median", n_bins: int = N_DECILES) -> Tuple[float, int]:
    """Fill value and chosen bin index for one feature."""
    bins = decile_bins(values, n_bins)
    n_found = int(bins.max()) + 1
    rates = np.array([observed_labels[bins == b].mean() for b in range(n_found)])
    distance = np.abs(rates - float(np.mean(missing_labels)))
    # First bin within rounding of the smallest distance
    chosen = int(np.flatnonzero(distance <= distance.min() + 1e-12)[0])
    members = values[bins == chosen]
    fill = float(np.median(members) if statistic == "median" else members.mean())
    return fill, chosen


class KMeansResult(NamedTuple):
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: Tuple[float, ...]
    n_iter: int


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans(features: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = KMEANS_MAX_ITER) -> KMeansResult:
    """
    Lloyd iterations from k-means++ starts, until assignments stop changing or `max_iter` rounds.
    Empty clusters are re-seeded at the rows farthest from their assigned centroids, one distinct row each.
    `inertia` holds the within-cluster sum of squares after every assignment step.
    """
    points = np.asarray(features, dtype=float)
    n_rows = points.shape[0]
    if not 1 <= k <= n_rows:
        raise ArgumentError(f"k must lie in [1, {n_rows}], got {k}")
    if np.isnan(points).any():
        raise ArgumentError("k-means needs a complete table")

    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n_rows)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        index = rng.choice(n_rows, p=closest / total) if total > 0 else rng.integers(n_rows)
        centroids[c] = points[index]
        closest = np.minimum(closest, ((points - centroids[c]) ** 2).sum(axis=1))

    assignments = np.full(n_rows, -1)
    inertia: List[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        distances = _squared_distances(points, centroids)
        new_assignments = distances.argmin(axis=1)
        inertia.append(float(distances[np.arange(n_rows), new_assignments].sum()))
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        counts = np.bincount(assignments, minlength=k)
        for c in np.flatnonzero(counts):
            centroids[c] = points[assignments == c].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            rows = reseed_empty_clusters(points, centroids, distances[np.arange(n_rows), assignments], empty)
            logger.debug(f"k-means clusters {empty.tolist()} empty, re-seeded at rows {rows}")
    return KMeansResult(assignments, centroids, tuple(inertia), n_iter)


def reseed_empty_clusters(points: np.ndarray, centroids: np.ndarray, own_distances: np.ndarray,
                          empty: Sequence[int]) -> List[int]:
    """
    Moves each empty cluster's centroid, in place, to the row farthest from the centroid it was assigned to, then
    counts that row as covered so the next empty cluster lands elsewhere. Returns the rows used.
    """
    remaining = np.array(own_distances, dtype=float)
    rows: List[int] = []
    for c in empty:
        farthest = int(remaining.argmax())
        centroids[c] = points[farthest]
        rows.append(farthest)
        remaining = np.minimum(remaining, ((points - points[farthest]) ** 2).sum(axis=1))
        remaining[farthest] = -np.inf
    return rows


def fill_from_clusters(features: np.ndarray, mask: Optional[np.ndarray], assignments: np.ndarray) -> np.ndarray:
    """
    Fills each missing cell with the mean of the observed values of its feature inside its cluster,
    falling back to the feature's global mean when the cluster has none.
    """
    table, missing = missing_cells(features, mask)
    fills = cluster_fill_table(table, missing, assignments, int(np.max(assignments)) + 1)
    table[missing] = fills[np.asarray(assignments)][missing]
    return table


def cluster_fill_table(table: np.ndarray, missing: np.ndarray, assignments: np.ndarray, k: int) -> np.ndarray:
    """(k x features) per-cluster observed means with the global observed mean as fallback."""
    global_means = _observed_means(table, missing)
    fills = np.tile(global_means, (k, 1))
    observed = ~missing
    for c in range(k):
        rows = assignments == c
        counts = observed[rows].sum(axis=0)
        sums = np.where(observed[rows], table[rows], 0.0).sum(axis=0)
        fills[c] = np.where(counts > 0, sums / np.maximum(counts, 1), global_means)
    return fills


class ClusterImputer(Imputer):
    """
    Clusters rows with k-means on a mean-filled, standardized working copy and fills each missing cell with
    its cluster's observed mean for that feature. New rows join the nearest fitted centroid.
    """
    method = ImputationMethod.CLUSTER

    def __init__(self, k: int = 3, seed: int = 0):
        super().__init__()
        self.k = k
        self.seed = seed
        self.centroids: Optional[np.ndarray] = None
        self.cluster_fills: Optional[np.ndarray] = None
        self._center: Optional[np.ndarray] = None
        self._scale: Optional[np.ndarray] = None

    def _working_copy(self, table: np.ndarray, missing: np.ndarray) -> np.ndarray:
        working = np.where(missing, self._center, table)
        return (working - self._center) / self._scale

    def _fit(self, table, missing, labels):
        self._center = _observed_means(table, missing)
        filled = np.where(missing, self._center, table)
        scale = filled.std(axis=0)
        self._scale = np.where(scale > 0, scale, 1.0)
        result = kmeans(self._working_copy(table, missing), self.k, np.random.default_rng(self.seed))
        self.centroids = result.centroids
        self.cluster_fills = cluster_fill_table(table, missing, result.assignments, self.k)
        return ImputerState(
            self.method, tuple(self._center), k=self.k,
            details={"cluster_fills": self.cluster_fills.tolist(), "n_iter": result.n_iter},
        )

    def assign(self, table: np.ndarray, missing: np.ndarray) -> np.ndarray:
        return _squared_distances(self._working_copy(table, missing), self.centroids).argmin(axis=1)

    def _fills(self, table, missing):
        return self.cluster_fills[self.assign(table, missing)]


def welch_t(first: np.ndarray, second: np.ndarray) -> float:
    """Welch two-sample t statistic; 0 when both groups have zero variance."""
    first, second = np.asarray(first, dtype=float), np.asarray(second, dtype=float)
    var_first = first.var(ddof=1) if first.size > 1 else 0.0
    var_second = second.var(ddof=1) if second.size > 1 else 0.0
    standard_error = np.sqrt(var_first / first.size + var_second / second.size)
    if standard_error == 0.0:
        return 0.0
    return float((first.mean() - second.mean()) / standard_error)


class TreeImputer(Imputer):
    """
    Per feature, a regression tree of the labels on the observed feature values; each leaf is compared with
    the rows where the feature is missing by a Welch t-test, and the fill is the median feature value of the
    leaf with the smallest |t|.
    """
    method = ImputationMethod.TREE
    needs_labels = True

    def __init__(self, max_depth: int = 3, min_samples_leaf: int = 20):
        super().__init__()
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def _fit(self, table, missing, labels):
        fills, leaf_counts = [], []
        for j in range(table.shape[1]):
            observed = ~missing[:, j]
            values = table[observed, j]
            if observed.all():
                fills.append(float(np.median(values)))
                leaf_counts.append(0)
                continue
            tree = DecisionTreeRegressor(max_depth=self.max_depth, min_samples_leaf=self.min_samples_leaf,
                                         random_state=0)
            tree.fit(values.reshape(-1, 1), labels[observed])
            leaves = tree.apply(values.reshape(-1, 1))
            missing_labels = labels[~observed]
            leaf_ids = np.unique(leaves)
            scores = np.array([abs(welch_t(labels[observed][leaves == leaf], missing_labels)) for leaf in leaf_ids])
            best = leaf_ids[int(np.argmin(scores))]
            fills.append(float(np.median(values[leaves == best])))
            leaf_counts.append(int(leaf_ids.size))
        return ImputerState(self.method, tuple(fills), details={"leaves": leaf_counts})


IMPUTERS: Dict[ImputationMethod, Type[Imputer]] = {
    ImputationMethod.MEAN: MeanImputer,
    ImputationMethod.MEDIAN: MedianImputer,
    ImputationMethod.INDICATOR: MissingIndicatorImputer,
    ImputationMethod.DECILE: DecileImputer,
    ImputationMethod.CLUSTER: ClusterImputer,
    ImputationMethod.TREE: TreeImputer,
}


def make_imputer(method: Any, **kwargs: Any) -> Imputer:
    try:
        imputer_class = IMPUTERS[ImputationMethod(method)]
    except ValueError as error:
        raise ArgumentError(f"Unknown imputation method {method!r}") from error
    return imputer_class(**kwargs)
