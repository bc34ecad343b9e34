# gbtree.py


"""
Second-order gradient-boosted trees for binary classification (logistic loss).

Splits are found by exact greedy enumeration. Each feature is sorted once per fit with missing values last;
every node keeps a (features x rows) matrix of its row indices in per-feature sorted order, so gradient and
hessian prefix sums for every candidate threshold of every feature come from one cumulative sum. Missing rows
are tried on both sides of each threshold and the better side is stored as the node's default direction.

Trees are stored as flat node arrays; prediction walks all rows down a tree level by level.
"""


import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from prepbench.errors import ArgumentError, FitError, SchemaError
from prepbench.static_utils import dump_json, load_json


logger = logging.getLogger(__name__)

IMPORTANCE_KINDS = ("gain", "weight")
LEAF = -1


@dataclass(frozen=True)
class BoostConfig:
    n_estimators: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    gamma: float = 0.0
    l2_reg: float = 1.0
    min_child_weight: float = 1.0
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 0:
            raise ArgumentError(f"n_estimators must be a non-negative integer, got {self.n_estimators}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ArgumentError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if int(self.max_depth) != self.max_depth or self.max_depth < 0:
            raise ArgumentError(f"max_depth must be a non-negative integer, got {self.max_depth}")
        if self.gamma < 0 or self.l2_reg < 0 or self.min_child_weight < 0:
            raise ArgumentError("gamma, l2_reg and min_child_weight must be non-negative")
        if not 0.0 < self.subsample <= 1.0:
            raise ArgumentError(f"subsample must lie in (0, 1], got {self.subsample}")
        object.__setattr__(self, "n_estimators", int(self.n_estimators))
        object.__setattr__(self, "max_depth", int(self.max_depth))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BoostConfig":
        try:
            return cls(**data)
        except TypeError as error:
            raise ArgumentError(f"Malformed boost config {dict(data)}: {error}") from error


class Split(NamedTuple):
    feature: int
    threshold: float
    gain: float
    default_left: bool


@dataclass(frozen=True)
class TreeNode:
    """One node of a tree; `feature == -1` marks a leaf whose output is `weight`."""
    feature: int = LEAF
    threshold: float = 0.0
    default_left: bool = True
    left: int = LEAF
    right: int = LEAF
    weight: float = 0.0
    gain: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    gain: np.ndarray

    @classmethod
    def from_nodes(cls, nodes: Sequence[TreeNode]) -> "Tree":
        if not nodes:
            raise ArgumentError("A tree needs at least one node")
        tree = cls(
            feature=np.array([node.feature for node in nodes], dtype=np.int64),
            threshold=np.array([node.threshold for node in nodes], dtype=float),
            default_left=np.array([node.default_left for node in nodes], dtype=bool),
            left=np.array([node.left for node in nodes], dtype=np.int64),
            right=np.array([node.right for node in nodes], dtype=np.int64),
            weight=np.array([node.weight for node in nodes], dtype=float),
            gain=np.array([node.gain for node in nodes], dtype=float),
        )
        for array in tree.arrays():
            array.flags.writeable = False
        return tree

    def arrays(self) -> Tuple[np.ndarray, ...]:
        return (self.feature, self.threshold, self.default_left, self.left, self.right, self.weight, self.gain)

    def nodes(self) -> List[TreeNode]:
        return [
            TreeNode(int(self.feature[i]), float(self.threshold[i]), bool(self.default_left[i]),
                     int(self.left[i]), int(self.right[i]), float(self.weight[i]), float(self.gain[i]))
            for i in range(self.feature.shape[0])
        ]

    @property
    def n_splits(self) -> int:
        return int((self.feature != LEAF).sum())

    def depth(self) -> int:
        depths = {0: 0}
        for index, node in enumerate(self.nodes()):
            if not node.is_leaf:
                depths[node.left] = depths[node.right] = depths[index] + 1
        return max(depths.values())

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Index of the leaf every row lands in."""
        node = np.zeros(features.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            current = node[active]
            values = features[active, self.feature[current]]
            go_left = np.where(np.isnan(values), self.default_left[current], values < self.threshold[current])
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, features: np.ndarray) -> np.ndarray:
        return self.weight[self.apply(features)]


@dataclass(frozen=True, eq=False)
class BoostedModel:
    trees: Tuple[Tree, ...]
    base_score: float
    gain_sum: np.ndarray
    split_count: np.ndarray
    config: BoostConfig
    n_features: int
    feature_names: Optional[Tuple[str, ...]] = None
    train_log_loss: Tuple[float, ...] = field(default_factory=tuple)

    def margin(self, features: np.ndarray) -> np.ndarray:
        total = np.full(features.shape[0], self.base_score)
        for tree in self.trees:
            total += tree.predict(features)
        return total


# ---------------------------------------------------------------------------------------------- split search


def _as_features(features: np.ndarray, missing_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Float copy of the table with every masked cell set to NaN."""
    table = np.array(features, dtype=float)
    if table.ndim != 2:
        raise FitError(f"Features must be a 2D table, got shape {table.shape}")
    if missing_mask is not None:
        mask = np.asarray(missing_mask, dtype=bool)
        if mask.shape != table.shape:
            raise SchemaError(f"Missing mask shape {mask.shape} differs from features {table.shape}")
        table[mask] = np.nan
    if np.isinf(table).any():
        raise FitError("Features contain infinite values")
    return table


def _presort(columns: np.ndarray, rows: Optional[np.ndarray] = None,
             order: Optional[np.ndarray] = None) -> np.ndarray:
    """(features x rows) row indices sorted by value per feature, missing last, restricted to `rows`."""
    if order is None:
        order = np.argsort(columns, axis=1, kind="stable")
    if rows is None:
        return order
    keep = np.zeros(columns.shape[1], dtype=bool)
    keep[rows] = True
    return order[keep[order]].reshape(columns.shape[0], -1)


def _split_score(g_left, h_left, g_right, h_right, g_total, h_total, l2_reg):
    return 0.5 * (g_left ** 2 / (h_left + l2_reg) + g_right ** 2 / (h_right + l2_reg)
                  - g_total ** 2 / (h_total + l2_reg))


def _find_split(columns: np.ndarray, sorted_idx: np.ndarray, grad: np.ndarray, hess: np.ndarray,
                config: BoostConfig) -> Optional[Split]:
    """
    Best split of one node. Ties resolve to the lowest feature index, then the lowest threshold.
    Returns None when no candidate has positive gain above gamma.
    """
    n_features, n_rows = sorted_idx.shape
    if n_rows < 2:
        return None
    values = np.take_along_axis(columns, sorted_idx, axis=1)
    observed = ~np.isnan(values)
    g = np.where(observed, grad[sorted_idx], 0.0)
    h = np.where(observed, hess[sorted_idx], 0.0)
    g_total = float(grad[sorted_idx[0]].sum())
    h_total = float(hess[sorted_idx[0]].sum())

    g_prefix = np.cumsum(g, axis=1)[:, :-1]
    h_prefix = np.cumsum(h, axis=1)[:, :-1]
    g_missing = (g_total - g.sum(axis=1))[:, None]
    h_missing = (h_total - h.sum(axis=1))[:, None]

    # Candidate between sorted positions i and i+1: both observed and distinct
    with np.errstate(invalid="ignore"):
        valid = observed[:, 1:] & (values[:, :-1] < values[:, 1:])

    def option_gain(g_left, h_left):
        g_right, h_right = g_total - g_left, h_total - h_left
        gain = _split_score(g_left, h_left, g_right, h_right, g_total, h_total, config.l2_reg)
        allowed = valid & (h_left >= config.min_child_weight) & (h_right >= config.min_child_weight)
        return np.where(allowed, gain, -np.inf)

    with np.errstate(divide="ignore", invalid="ignore"):
        gain_missing_right = option_gain(g_prefix, h_prefix)
        gain_missing_left = option_gain(g_prefix + g_missing, h_prefix + h_missing)
    gain = np.maximum(gain_missing_left, gain_missing_right)

    flat = int(np.argmax(gain))
    feature, position = divmod(flat, n_rows - 1)
    best_gain = float(gain[feature, position])
    if not np.isfinite(best_gain) or best_gain <= 0.0 or best_gain - config.gamma <= 0.0:
        return None

    low, high = values[feature, position], values[feature, position + 1]
    threshold = float(low + (high - low) / 2.0)
    if threshold <= low:
        threshold = float(high)
    return Split(
        feature=int(feature),
        threshold=threshold,
        gain=best_gain,
        default_left=bool(gain_missing_left[feature, position] >= gain_missing_right[feature, position]),
    )


def best_split(features: np.ndarray, grad: np.ndarray, hess: np.ndarray, config: Optional[BoostConfig] = None,
               rows: Optional[np.ndarray] = None) -> Optional[Split]:
    """Best exact split of the given rows (default all), or None if no split beats gamma."""
    config = config or BoostConfig()
    table = _as_features(features)
    columns = np.ascontiguousarray(table.T)
    return _find_split(columns, _presort(columns, rows), np.asarray(grad, dtype=float),
                       np.asarray(hess, dtype=float), config)


def _grow_tree(columns: np.ndarray, sorted_idx: np.ndarray, grad: np.ndarray, hess: np.ndarray,
               config: BoostConfig) -> Tree:
    nodes: List[Dict[str, Any]] = []
    goes_left = np.zeros(columns.shape[1], dtype=bool)

    def leaf_weight(rows: np.ndarray) -> float:
        return float(-grad[rows].sum() / (hess[rows].sum() + config.l2_reg) * config.learning_rate)

    # Depth-first, left child first, so node ids are stable for a given data set
    stack = [(sorted_idx, 0, None, None)]
    while stack:
        node_idx, depth, parent, side = stack.pop()
        node_id = len(nodes)
        if parent is not None:
            nodes[parent][side] = node_id
        rows = node_idx[0]
        split = _find_split(columns, node_idx, grad, hess, config) if depth < config.max_depth else None
        if split is None:
            nodes.append({"feature": LEAF, "weight": leaf_weight(rows)})
            continue
        values = columns[split.feature, rows]
        goes_left[rows] = np.where(np.isnan(values), split.default_left, values < split.threshold)
        left_idx = node_idx[goes_left[node_idx]].reshape(node_idx.shape[0], -1)
        right_idx = node_idx[~goes_left[node_idx]].reshape(node_idx.shape[0], -1)
        nodes.append({
            "feature": split.feature, "threshold": split.threshold, "default_left": split.default_left,
            "gain": split.gain, "weight": leaf_weight(rows),
        })
        stack.append((right_idx, depth + 1, node_id, "right"))
        stack.append((left_idx, depth + 1, node_id, "left"))
    return Tree.from_nodes([TreeNode(**node) for node in nodes])


# ---------------------------------------------------------------------------------------------- boosting


def _log_loss(probability: np.ndarray, labels: np.ndarray) -> float:
    eps = 1e-15
    probability = np.clip(probability, eps, 1.0 - eps)
    return float(-np.mean(labels * np.log(probability) + (1 - labels) * np.log(1.0 - probability)))


def fit(config: BoostConfig, features: np.ndarray, labels: np.ndarray, missing_mask: Optional[np.ndarray] = None,
        feature_names: Optional[Sequence[str]] = None) -> BoostedModel:
    """
    Boosts `config.n_estimators` trees on the logistic loss. Missing cells (NaN or masked) are routed by
    learned default directions.

    Raises:
        FitError: Empty table, fewer than 2 rows, or labels with a single class.
    """
    table = _as_features(features, missing_mask)
    labels = np.asarray(labels, dtype=float)
    n_rows, n_features = table.shape
    if n_features == 0 or n_rows == 0:
        raise FitError(f"Cannot fit on an empty table of shape {table.shape}")
    if n_rows < 2:
        raise FitError("Need at least 2 rows to fit")
    if labels.shape != (n_rows,):
        raise FitError(f"Labels shape {labels.shape} does not match {n_rows} rows")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise FitError("Labels must be binary 0/1")
    positive_rate = float(labels.mean())
    if positive_rate in (0.0, 1.0):
        raise FitError("Labels contain a single class")

    base_score = float(np.log(positive_rate / (1.0 - positive_rate)))
    columns = np.ascontiguousarray(table.T)
    presorted = _presort(columns)
    rng = np.random.default_rng(config.seed)
    sample_size = max(2, int(round(config.subsample * n_rows)))

    margin = np.full(n_rows, base_score)
    gain_sum = np.zeros(n_features)
    split_count = np.zeros(n_features, dtype=np.int64)
    trees: List[Tree] = []
    losses = [_log_loss(expit(margin), labels)]
    for _ in range(config.n_estimators):
        probability = expit(margin)
        grad = probability - labels
        hess = probability * (1.0 - probability)
        if config.subsample < 1.0:
            rows = np.sort(rng.choice(n_rows, size=min(sample_size, n_rows), replace=False))
            sorted_idx = _presort(columns, rows, order=presorted)
        else:
            sorted_idx = presorted
        tree = _grow_tree(columns, sorted_idx, grad, hess, config)
        internal = tree.feature != LEAF
        np.add.at(gain_sum, tree.feature[internal], tree.gain[internal])
        np.add.at(split_count, tree.feature[internal], 1)
        trees.append(tree)
        margin += tree.predict(table)
        losses.append(_log_loss(expit(margin), labels))

    logger.debug(f"Fitted {len(trees)} trees on {n_rows}x{n_features}, final log-loss {losses[-1]:.5f}")
    gain_sum.flags.writeable = False
    split_count.flags.writeable = False
    return BoostedModel(
        trees=tuple(trees),
        base_score=base_score,
        gain_sum=gain_sum,
        split_count=split_count,
        config=config,
        n_features=n_features,
        feature_names=None if feature_names is None else tuple(feature_names),
        train_log_loss=tuple(losses),
    )


def _check_schema(model: BoostedModel, features: np.ndarray, missing_mask: Optional[np.ndarray]) -> np.ndarray:
    table = np.asarray(features, dtype=float)
    if table.ndim != 2 or table.shape[1] != model.n_features:
        raise SchemaError(f"Model expects {model.n_features} features, got shape {table.shape}")
    if missing_mask is not None:
        table = _as_features(table, missing_mask)
    return table


def predict_proba(model: BoostedModel, features: np.ndarray, missing_mask: Optional[np.ndarray] = None) -> np.ndarray:
    """sigmoid(base_score + sum of tree outputs) per row."""
    table = _check_schema(model, features, missing_mask)
    return expit(model.margin(table))


def staged_predict_proba(model: BoostedModel, features: np.ndarray,
                         missing_mask: Optional[np.ndarray] = None) -> Iterator[np.ndarray]:
    """Probabilities after 0, 1, ..., n_estimators rounds."""
    table = _check_schema(model, features, missing_mask)
    margin = np.full(table.shape[0], model.base_score)
    yield expit(margin)
    for tree in model.trees:
        margin = margin + tree.predict(table)
        yield expit(margin)


def importance(model: BoostedModel, kind: str = "gain") -> np.ndarray:
    """Per-feature gain sums or split counts; unused features score 0."""
    if kind == "gain":
        return np.array(model.gain_sum, dtype=float)
    if kind == "weight":
        return np.array(model.split_count, dtype=float)
    raise ArgumentError(f"Unknown importance kind {kind!r}, expected one of {IMPORTANCE_KINDS}")


# ---------------------------------------------------------------------------------------------- tree dump


def dump_model(model: BoostedModel, file_path: Optional[str] = None) -> Dict[str, Any]:
    """JSON tree dump: node lists with feature/threshold/default/weight. Written to `file_path` if given."""
    dump = {
        "base_score": model.base_score,
        "n_features": model.n_features,
        "feature_names": None if model.feature_names is None else list(model.feature_names),
        "config": model.config.to_dict(),
        "trees": [[asdict(node) for node in tree.nodes()] for tree in model.trees],
    }
    if file_path is not None:
        dump_json(file_path, dump)
    return dump


def load_model(source: Any) -> BoostedModel:
    """Rebuilds a model from a dump dict or a dump file; importance tallies are recomputed from the nodes."""
    dump = load_json(source) if isinstance(source, str) else source
    n_features = int(dump["n_features"])
    trees = tuple(Tree.from_nodes([TreeNode(**node) for node in nodes]) for nodes in dump["trees"])
    gain_sum = np.zeros(n_features)
    split_count = np.zeros(n_features, dtype=np.int64)
    for tree in trees:
        internal = tree.feature != LEAF
        np.add.at(gain_sum, tree.feature[internal], tree.gain[internal])
        np.add.at(split_count, tree.feature[internal], 1)
    names = dump.get("feature_names")
    return BoostedModel(
        trees=trees,
        base_score=float(dump["base_score"]),
        gain_sum=gain_sum,
        split_count=split_count,
        config=BoostConfig.from_dict(dump.get("config", {})),
        n_features=n_features,
        feature_names=None if names is None else tuple(names),
    )
