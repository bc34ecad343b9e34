# featsel.py


"""
Feature selection strategies. Each returns a SelectionResult holding the selected feature indices,
a full ranking (1 = most important) and the per-feature scores behind it.

Filters: Pearson / Spearman correlation with a pairwise redundancy step.
Embedded: LASSO (squared loss on the 0/1 target, coordinate descent) and boosted-tree gain / weight importance.
Wrappers: permutation importance and recursive feature elimination on boosted trees.
"""


import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata
from sklearn.model_selection import KFold, ShuffleSplit, StratifiedShuffleSplit

from prepbench import gbtree, metrics
from prepbench.errors import ArgumentError, FitError, PreconditionError, UndefinedCorrelationError
from prepbench.gbtree import BoostConfig


logger = logging.getLogger(__name__)

DEFAULT_PAIR_THRESHOLD = 0.45
DEFAULT_LAMBDA_FRACTIONS = (1e-3, 1e-4, 1e-5)
LASSO_TOLERANCE = 1e-6
LASSO_MAX_SWEEPS = 10_000
STANDARDIZED_TOLERANCE = 1e-6
# Smaller than the model config: wrappers fit many models per selection
DEFAULT_SELECTOR_BOOST = BoostConfig(n_estimators=50, learning_rate=0.3, max_depth=4)


class SelectionMethod(str, Enum):
    ALL = "all"
    PEARSON = "pearson"
    SPEARMAN = "spearman"
    LASSO = "lasso"
    XGB_GAIN = "xgb_gain"
    XGB_WEIGHT = "xgb_weight"
    PERMUTATION = "permutation"
    RFE = "rfe"


@dataclass(frozen=True, eq=False)
class SelectionResult:
    method: SelectionMethod
    selected: Tuple[int, ...]
    ranking: np.ndarray
    scores: np.ndarray
    details: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n_features = self.ranking.shape[0]
        if sorted(self.ranking.tolist()) != list(range(1, n_features + 1)):
            raise ArgumentError(f"Ranking of {self.method.value} is not a permutation of 1..{n_features}")
        if any(not 0 <= index < n_features for index in self.selected):
            raise ArgumentError(f"Selection of {self.method.value} references unknown features")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "selected": list(self.selected),
            "ranking": self.ranking.tolist(),
            "scores": self.scores.tolist(),
            "details": dict(self.details),
        }


@dataclass(frozen=True)
class SelectorConfig:
    """Knobs shared by the selectors; `n_select` None means the caller's default."""
    n_select: Optional[int] = None
    pair_threshold: float = DEFAULT_PAIR_THRESHOLD
    lambda_grid: Optional[Tuple[float, ...]] = None
    lambda_fractions: Tuple[float, ...] = DEFAULT_LAMBDA_FRACTIONS
    cv_folds: int = 5
    importance_repeats: int = 5
    importance_train_size: float = 0.6
    permutation_repeats: int = 1
    permutation_validation: float = 0.3
    rfe_step: int = 1
    boost: BoostConfig = DEFAULT_SELECTOR_BOOST
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_select": self.n_select,
            "pair_threshold": self.pair_threshold,
            "lambda_grid": None if self.lambda_grid is None else list(self.lambda_grid),
            "lambda_fractions": list(self.lambda_fractions),
            "cv_folds": self.cv_folds,
            "importance_repeats": self.importance_repeats,
            "importance_train_size": self.importance_train_size,
            "permutation_repeats": self.permutation_repeats,
            "permutation_validation": self.permutation_validation,
            "rfe_step": self.rfe_step,
            "boost": self.boost.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SelectorConfig":
        data = dict(data)
        if "boost" in data:
            data["boost"] = BoostConfig.from_dict(data["boost"])
        for key in ("lambda_grid", "lambda_fractions"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        try:
            return cls(**data)
        except TypeError as error:
            raise ArgumentError(f"Malformed selector config: {error}") from error


def ranks_from_order(order: Sequence[int]) -> np.ndarray:
    """Rank of every feature given features listed from most to least important."""
    order = np.asarray(order, dtype=int)
    ranking = np.empty(order.size, dtype=int)
    ranking[order] = np.arange(1, order.size + 1)
    return ranking


def order_by_score(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score, ties to the lower index."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def _check_n_select(n_select: int, n_features: int) -> None:
    if not 0 <= n_select <= n_features:
        raise ArgumentError(f"Cannot select {n_select} of {n_features} features")


def mean_filled(features: np.ndarray) -> np.ndarray:
    """Working copy with NaN cells replaced by their column mean."""
    table = np.array(features, dtype=float)
    missing = np.isnan(table)
    if missing.any():
        counts = (~missing).sum(axis=0)
        sums = np.where(missing, 0.0, table).sum(axis=0)
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        table[missing] = np.broadcast_to(means, table.shape)[missing]
    return table


# ---------------------------------------------------------------------------------------------- correlation


def pearson_corr(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ArgumentError(f"Correlation needs two equal-length columns of at least 2 values, got {a.shape}, {b.shape}")
    da, db = a - a.mean(), b - b.mean()
    denominator = np.sqrt((da ** 2).sum() * (db ** 2).sum())
    if denominator == 0.0:
        raise UndefinedCorrelationError("Correlation with a zero-variance column is undefined")
    return float(np.clip((da * db).sum() / denominator, -1.0, 1.0))


def spearman_corr(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson correlation of the average ranks."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ArgumentError(f"Correlation needs two equal-length columns, got {a.shape}, {b.shape}")
    return pearson_corr(rankdata(a), rankdata(b))


def _correlation_inputs(features: np.ndarray, labels: np.ndarray, flavor: str) -> Tuple[np.ndarray, np.ndarray]:
    table, labels = mean_filled(features), np.asarray(labels, dtype=float)
    if flavor == "spearman":
        table = rankdata(table, axis=0)
        labels = rankdata(labels)
    elif flavor != "pearson":
        raise ArgumentError(f"Unknown correlation flavor {flavor!r}")
    return table, labels


def _unit_columns(table: np.ndarray, names: Sequence[str], strict: bool = True) -> np.ndarray:
    """Centered columns of unit norm. Constant columns raise, or become zero columns when not strict."""
    centered = table - table.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        if strict:
            raise UndefinedCorrelationError(f"Zero-variance column(s) {[names[i] for i in zero]}")
        logger.warning(f"Zero-variance column(s) {[names[i] for i in zero]} get correlation 0")
    return centered / np.where(norms > 0, norms, 1.0)


def correlation_reduce(features: np.ndarray, labels: np.ndarray, flavor: str = "pearson",
                       pair_threshold: float = DEFAULT_PAIR_THRESHOLD, n_select: Optional[int] = None) -> SelectionResult:
    """
    Step 1: walking the feature pairs from the most to the least correlated, every pair with |corr| above the
    threshold whose members both survive loses the member less correlated with the labels.
    Step 2: survivors are ranked by |corr| with the labels; dropped features follow, ranked the same way.
    The first `n_select` of that ranking are selected.
    """
    if not 0.0 < pair_threshold < 1.0:
        raise ArgumentError(f"pair_threshold must lie in (0, 1), got {pair_threshold}")
    table, target = _correlation_inputs(features, labels, flavor)
    n_features = table.shape[1]
    n_select = n_features if n_select is None else n_select
    _check_n_select(n_select, n_features)

    names = [f"feature {j}" for j in range(n_features)]
    unit = _unit_columns(table, names, strict=False)
    target_unit = _unit_columns(target.reshape(-1, 1), ["labels"])[:, 0]
    pair_corr = np.clip(unit.T @ unit, -1.0, 1.0)
    target_corr = np.abs(np.clip(unit.T @ target_unit, -1.0, 1.0))

    first, second = np.triu_indices(n_features, k=1)
    strength = np.abs(pair_corr[first, second])
    flagged = np.flatnonzero(strength > pair_threshold)
    flagged = flagged[np.argsort(-strength[flagged], kind="stable")]
    dropped: List[int] = []
    for pair in flagged:
        i, j = int(first[pair]), int(second[pair])
        if i in dropped or j in dropped:
            continue
        dropped.append(j if target_corr[j] <= target_corr[i] else i)

    survivors = [j for j in order_by_score(target_corr) if j not in dropped]
    losers = [j for j in order_by_score(target_corr) if j in dropped]
    order = survivors + losers
    return SelectionResult(
        method=SelectionMethod(flavor),
        selected=tuple(int(j) for j in order[:n_select]),
        ranking=ranks_from_order(order),
        scores=target_corr,
        details={"dropped": sorted(dropped), "pair_threshold": pair_threshold},
    )


# ---------------------------------------------------------------------------------------------- lasso


def standardize(table: np.ndarray, center: Optional[np.ndarray] = None,
                scale: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x - mean) / std with population std; zero-variance columns get scale 1."""
    table = np.asarray(table, dtype=float)
    if center is None:
        center = table.mean(axis=0)
        spread = table.std(axis=0)
        scale = np.where(spread > 0, spread, 1.0)
    return (table - center) / scale, center, scale


def _check_standardized(features: np.ndarray) -> None:
    means = features.mean(axis=0)
    stds = features.std(axis=0)
    bad = np.flatnonzero((np.abs(means) > STANDARDIZED_TOLERANCE) | (np.abs(stds - 1.0) > STANDARDIZED_TOLERANCE))
    if bad.size:
        raise PreconditionError(f"LASSO needs standardized columns; column(s) {bad.tolist()} are not")


def lasso_fit(features: np.ndarray, labels: np.ndarray, lam: float, tol: float = LASSO_TOLERANCE,
              max_sweeps: int = LASSO_MAX_SWEEPS) -> np.ndarray:
    """
    Minimizes sum((y - mean(y) - X b)^2) + lam * sum(|b|) by cyclic coordinate descent with soft-thresholding.
    Stops when no coefficient moves by `tol` or more during a sweep.
    """
    if lam < 0:
        raise ArgumentError(f"lambda must be non-negative, got {lam}")
    table = np.asarray(features, dtype=float)
    _check_standardized(table)
    target = np.asarray(labels, dtype=float)
    target = target - target.mean()

    gram = table.T @ table
    correlation = table.T @ target
    squared_norms = np.diag(gram).copy()
    coefficients = np.zeros(table.shape[1])
    half_lambda = lam / 2.0
    for sweep in range(1, max_sweeps + 1):
        max_change = 0.0
        for j in range(table.shape[1]):
            rho = correlation[j] - gram[j] @ coefficients + squared_norms[j] * coefficients[j]
            updated = np.sign(rho) * max(abs(rho) - half_lambda, 0.0) / squared_norms[j]
            max_change = max(max_change, abs(updated - coefficients[j]))
            coefficients[j] = updated
        if max_change < tol:
            break
    else:
        logger.warning(f"LASSO did not converge in {max_sweeps} sweeps at lambda={lam}")
    return coefficients


def lambda_path(features: np.ndarray, labels: np.ndarray,
                fractions: Sequence[float] = DEFAULT_LAMBDA_FRACTIONS) -> Tuple[float, ...]:
    """Penalties as fractions of the smallest lambda that zeroes every coefficient."""
    table, _, _ = standardize(mean_filled(features))
    target = np.asarray(labels, dtype=float)
    lambda_max = 2.0 * float(np.abs(table.T @ (target - target.mean())).max())
    return tuple(fraction * lambda_max for fraction in fractions)


def _fit_informative(table: np.ndarray, labels: np.ndarray, lam: float) -> np.ndarray:
    """lasso_fit on the non-constant columns of an already standardized table; constant columns get 0."""
    informative = table.std(axis=0) > 0
    coefficients = np.zeros(table.shape[1])
    if informative.any():
        coefficients[informative] = lasso_fit(table[:, informative], labels, lam)
    return coefficients


def lasso_select(features: np.ndarray, labels: np.ndarray, lambda_grid: Optional[Sequence[float]] = None,
                 n_folds: int = 5, seed: int = 0,
                 lambda_fractions: Sequence[float] = DEFAULT_LAMBDA_FRACTIONS) -> SelectionResult:
    """
    Picks lambda by k-fold cross-validated squared error, refits on all rows and selects every feature with a
    non-zero coefficient.
    """
    table = mean_filled(features)
    labels = np.asarray(labels, dtype=float)
    grid = tuple(lambda_path(table, labels, lambda_fractions) if lambda_grid is None else lambda_grid)
    if not grid:
        raise ArgumentError("lasso_select needs a non-empty lambda grid")

    folds = list(KFold(n_splits=n_folds, shuffle=True, random_state=seed % 2 ** 32).split(table))
    cv_error = np.zeros(len(grid))
    for train_rows, test_rows in folds:
        train, center, scale = standardize(table[train_rows])
        test, _, _ = standardize(table[test_rows], center, scale)
        intercept = labels[train_rows].mean()
        for index, lam in enumerate(grid):
            coefficients = _fit_informative(train, labels[train_rows], lam)
            residual = labels[test_rows] - intercept - test @ coefficients
            cv_error[index] += float((residual ** 2).mean()) / len(folds)
    best = int(np.argmin(cv_error))

    full, _, _ = standardize(table)
    coefficients = _fit_informative(full, labels, grid[best])
    order = order_by_score(np.abs(coefficients))
    selected = tuple(int(j) for j in order if coefficients[j] != 0.0)
    logger.debug(f"LASSO chose lambda={grid[best]:.4g}, {len(selected)}/{table.shape[1]} features non-zero")
    return SelectionResult(
        method=SelectionMethod.LASSO,
        selected=selected,
        ranking=ranks_from_order(order),
        scores=coefficients,
        details={"lambda": grid[best], "lambda_grid": list(grid), "cv_error": cv_error.tolist()},
    )


# ---------------------------------------------------------------------------------------------- tree based


def xgb_importance_select(features: np.ndarray, labels: np.ndarray, kind: str = "gain", n_select: Optional[int] = None,
                          config: BoostConfig = DEFAULT_SELECTOR_BOOST, n_repeats: int = 5,
                          train_size: float = 0.6, seed: int = 0) -> SelectionResult:
    """
    Averages normalized gain or weight importances over `n_repeats` models, each fitted on a random
    `train_size` share of the rows.
    """
    table = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    n_features = table.shape[1]
    n_select = n_features if n_select is None else n_select
    _check_n_select(n_select, n_features)
    if kind not in gbtree.IMPORTANCE_KINDS:
        raise ArgumentError(f"Unknown importance kind {kind!r}")

    splitter = ShuffleSplit(n_splits=n_repeats, train_size=train_size, random_state=seed % 2 ** 32)
    average = np.zeros(n_features)
    for repetition, (train_rows, _) in enumerate(splitter.split(table)):
        try:
            model = gbtree.fit(config, table[train_rows], labels[train_rows])
        except FitError as error:
            raise FitError(f"Importance repetition {repetition}: {error}") from error
        scores = gbtree.importance(model, kind)
        total = scores.sum()
        average += (scores / total if total > 0 else scores) / n_repeats
    order = order_by_score(average)
    return SelectionResult(
        method=SelectionMethod.XGB_GAIN if kind == "gain" else SelectionMethod.XGB_WEIGHT,
        selected=tuple(int(j) for j in order[:n_select]),
        ranking=ranks_from_order(order),
        scores=average,
    )


def permutation_select(features: np.ndarray, labels: np.ndarray, n_select: Optional[int] = None, n_repeats: int = 1,
                       config: BoostConfig = DEFAULT_SELECTOR_BOOST, seed: int = 0,
                       validation_fraction: float = 0.3) -> SelectionResult:
    """
    Fits once on a training share, then shuffles one validation column at a time; importance is the
    validation AUC lost. Each feature draws its shuffles from its own random stream.
    """
    table = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    n_features = table.shape[1]
    n_select = n_features if n_select is None else n_select
    _check_n_select(n_select, n_features)

    splitter = StratifiedShuffleSplit(n_splits=1, test_size=validation_fraction, random_state=seed % 2 ** 32)
    train_rows, valid_rows = next(splitter.split(table, labels))
    model = gbtree.fit(config, table[train_rows], labels[train_rows])
    valid = table[valid_rows]
    valid_labels = labels[valid_rows]
    benchmark = metrics.auc(gbtree.predict_proba(model, valid), valid_labels)

    streams = np.random.SeedSequence(seed).spawn(n_features)
    importances = np.zeros(n_features)
    for j in range(n_features):
        if model.split_count[j] == 0:
            continue
        rng = np.random.default_rng(streams[j])
        shuffled_scores = []
        for _ in range(n_repeats):
            shuffled = valid.copy()
            shuffled[:, j] = rng.permutation(shuffled[:, j])
            shuffled_scores.append(metrics.auc(gbtree.predict_proba(model, shuffled), valid_labels))
        importances[j] = benchmark - float(np.mean(shuffled_scores))
    order = order_by_score(importances)
    return SelectionResult(
        method=SelectionMethod.PERMUTATION,
        selected=tuple(int(j) for j in order[:n_select]),
        ranking=ranks_from_order(order),
        scores=importances,
        details={"benchmark_auc": benchmark},
    )


def rfe_select(features: np.ndarray, labels: np.ndarray, n_select: Optional[int] = None, step: int = 1,
               config: BoostConfig = DEFAULT_SELECTOR_BOOST) -> SelectionResult:
    """
    Refits and drops the `step` features with the lowest gain until `n_select` remain. Survivors are ranked
    by their gain in the final fit; eliminated features follow, the last eliminated first.
    """
    table = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    n_features = table.shape[1]
    n_select = n_features if n_select is None else n_select
    _check_n_select(n_select, n_features)
    if step < 1:
        raise ArgumentError(f"RFE step must be at least 1, got {step}")

    remaining = list(range(n_features))
    eliminated: List[int] = []
    scores = np.zeros(n_features)
    while remaining:
        gains = gbtree.importance(gbtree.fit(config, table[:, remaining], labels), "gain")
        scores[remaining] = gains
        if len(remaining) <= n_select:
            break
        count = min(step, len(remaining) - n_select)
        weakest = np.argsort(gains, kind="stable")[:count].tolist()
        eliminated.extend(remaining[position] for position in weakest)
        remaining = [feature for position, feature in enumerate(remaining) if position not in weakest]
        logger.debug(f"RFE eliminated {eliminated[-count:]}, {len(remaining)} features left")

    survivors = [remaining[position] for position in order_by_score(scores[remaining])] if remaining else []
    order = survivors + eliminated[::-1]
    return SelectionResult(
        method=SelectionMethod.RFE,
        selected=tuple(survivors),
        ranking=ranks_from_order(order),
        scores=scores,
        details={"elimination_order": eliminated},
    )


def select_all(features: np.ndarray) -> SelectionResult:
    n_features = np.asarray(features).shape[1]
    return SelectionResult(
        method=SelectionMethod.ALL,
        selected=tuple(range(n_features)),
        ranking=np.arange(1, n_features + 1),
        scores=np.zeros(n_features),
    )


def select(method: Any, features: np.ndarray, labels: np.ndarray, n_select: Optional[int] = None,
           config: Optional[SelectorConfig] = None) -> SelectionResult:
    """Runs one selection method with the knobs of `config`."""
    config = config or SelectorConfig()
    try:
        method = SelectionMethod(method)
    except ValueError as error:
        raise ArgumentError(f"Unknown selection method {method!r}") from error
    n_select = n_select if n_select is not None else config.n_select

    if method is SelectionMethod.ALL:
        return select_all(features)
    if method in (SelectionMethod.PEARSON, SelectionMethod.SPEARMAN):
        return correlation_reduce(features, labels, method.value, config.pair_threshold, n_select)
    if method is SelectionMethod.LASSO:
        return lasso_select(features, labels, config.lambda_grid, config.cv_folds, config.seed, config.lambda_fractions)
    if method in (SelectionMethod.XGB_GAIN, SelectionMethod.XGB_WEIGHT):
        kind = "gain" if method is SelectionMethod.XGB_GAIN else "weight"
        return xgb_importance_select(features, labels, kind, n_select, config.boost, config.importance_repeats,
                                     config.importance_train_size, config.seed)
    if method is SelectionMethod.PERMUTATION:
        return permutation_select(features, labels, n_select, config.permutation_repeats, config.boost, config.seed,
                                  config.permutation_validation)
    return rfe_select(features, labels, n_select, config.rfe_step, config.boost)
