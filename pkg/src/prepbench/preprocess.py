# preprocess.py


"""
Standard preprocessing and the per-arm pipeline.

Every arm runs the same stages in the same order: column alignment, standardization of numeric columns,
imputation, categorical encoding and feature selection. An arm's experimental method replaces exactly one
stage; the other stages keep their control behavior. All stages are fitted on training rows only.
"""


import logging
import warnings
from dataclasses import replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from prepbench import catenc, featsel, nullimp
from prepbench.errors import DegenerateColumnWarning, SchemaError, check_fitted
from prepbench.featsel import SelectionMethod, SelectorConfig
from prepbench.synthdata import Dataset, Experiment


logger = logging.getLogger(__name__)

CONTROL_METHODS = {
    Experiment.FEATURE_SELECTION: SelectionMethod.ALL.value,
    Experiment.CATEGORICAL_ENCODING: catenc.EncodingMethod.ONEHOT.value,
    Experiment.NULL_IMPUTATION: nullimp.ImputationMethod.MEAN.value,
}

EXPERIMENT_METHODS = {
    Experiment.FEATURE_SELECTION: tuple(method.value for method in SelectionMethod),
    Experiment.CATEGORICAL_ENCODING: tuple(method.value for method in catenc.EncodingMethod),
    Experiment.NULL_IMPUTATION: tuple(method.value for method in nullimp.ImputationMethod),
}


class Standardizer:
    """
    (x - train_mean) / train_std per numeric column, computed over observed cells (population std).
    Columns with zero training variance pass through unchanged. Missing cells stay missing.
    """

    def __init__(self):
        self.mean: Optional[np.ndarray] = None
        self.std: Optional[np.ndarray] = None
        self.passthrough: Tuple[int, ...] = ()

    @property
    def is_fitted(self) -> bool:
        return self.mean is not None

    def fit(self, features: np.ndarray, mask: Optional[np.ndarray] = None,
            feature_names: Optional[Sequence[str]] = None) -> "Standardizer":
        table, missing = nullimp.missing_cells(features, mask)
        observed = ~missing
        counts = observed.sum(axis=0)
        sums = np.where(observed, table, 0.0).sum(axis=0)
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        squares = np.where(observed, (table - mean) ** 2, 0.0).sum(axis=0)
        std = np.sqrt(squares / np.maximum(counts, 1))

        self.passthrough = tuple(int(j) for j in np.flatnonzero(std == 0.0))
        if self.passthrough:
            names = [feature_names[j] if feature_names is not None else str(j) for j in self.passthrough]
            message = f"Zero-variance column(s) {names} pass through standardization unchanged"
            logger.warning(message)
            warnings.warn(message, DegenerateColumnWarning, stacklevel=2)
        self.mean = np.where(std > 0, mean, 0.0)
        self.std = np.where(std > 0, std, 1.0)
        return self

    @check_fitted
    def transform(self, features: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        table, missing = nullimp.missing_cells(features, mask)
        if table.shape[1] != self.mean.shape[0]:
            raise SchemaError(f"Standardizer fitted on {self.mean.shape[0]} columns, got {table.shape[1]}")
        table = (table - self.mean) / self.std
        table[missing] = np.nan
        return table

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "passthrough": list(self.passthrough)}


def align_columns(train: Dataset, other: Dataset) -> Dataset:
    """
    Reorders the numeric and categorical columns of `other` to the training layout. Columns the training data
    lacks are dropped with a warning.

    Raises:
        SchemaError: If a training column is absent from `other`.
    """
    if other.feature_names == train.feature_names and set(other.categoricals) == set(train.categoricals):
        return other
    position = {name: index for index, name in enumerate(other.feature_names)}
    absent = [name for name in train.feature_names if name not in position]
    absent += [name for name in train.categoricals if name not in other.categoricals]
    if absent:
        raise SchemaError(f"Columns {absent} of the training data are missing")
    extra = [name for name in other.feature_names if name not in train.feature_names]
    extra += [name for name in other.categoricals if name not in train.categoricals]
    if extra:
        logger.warning(f"Dropping columns {extra} absent from the training data")
    order = [position[name] for name in train.feature_names]
    return replace(
        other,
        features=np.asarray(other.features)[:, order],
        missing_mask=np.asarray(other.missing_mask)[:, order],
        feature_names=train.feature_names,
        noise_flags=train.noise_flags,
        categoricals={name: other.categoricals[name] for name in train.categoricals},
    )


def default_n_select(dataset: Dataset) -> int:
    """Signal-feature count on synthetic data, half the features otherwise."""
    if any(dataset.noise_flags):
        return len(dataset.signal_feature_names)
    return max(1, dataset.n_features // 2)


class ArmPipeline:
    """
    Preprocessing of one experiment arm. `method` is the arm's method identifier for the experiment's stage;
    the remaining stages use the control methods.
    """

    def __init__(self, experiment: Experiment, method: str, selector_config: Optional[SelectorConfig] = None,
                 n_select: Optional[int] = None, imputer_options: Optional[Mapping[str, Any]] = None, seed: int = 0):
        self.experiment = Experiment(experiment)
        if method not in EXPERIMENT_METHODS[self.experiment]:
            raise SchemaError(f"Method {method!r} does not belong to the {self.experiment.value} experiment")
        self.method = method
        self.selector_config = replace(selector_config or SelectorConfig(), seed=seed)
        self.n_select = n_select
        self.imputer_options = dict(imputer_options or {})
        self.seed = seed
        self.train: Optional[Dataset] = None
        self.standardizer = Standardizer()
        self.imputer: Optional[nullimp.Imputer] = None
        self.encoders: Dict[str, catenc.CategoricalEncoder] = {}
        self.selection: Optional[featsel.SelectionResult] = None
        self.pre_selection_names: List[str] = []

    @property
    def is_fitted(self) -> bool:
        return self.train is not None

    @property
    def encoding_method(self) -> str:
        return self.method if self.experiment is Experiment.CATEGORICAL_ENCODING else CONTROL_METHODS[
            Experiment.CATEGORICAL_ENCODING]

    def _make_imputer(self) -> Optional[nullimp.Imputer]:
        if self.experiment is not Experiment.NULL_IMPUTATION:
            return None
        options = {}
        if self.method == nullimp.ImputationMethod.CLUSTER.value:
            options = {"k": self.imputer_options.get("k", 3), "seed": self.seed}
        elif self.method == nullimp.ImputationMethod.INDICATOR.value:
            options = {"sentinel": self.imputer_options.get("sentinel", nullimp.DEFAULT_SENTINEL)}
        elif self.method == nullimp.ImputationMethod.DECILE.value:
            options = {"statistic": self.imputer_options.get("decile_statistic", "median")}
        elif self.method == nullimp.ImputationMethod.TREE.value:
            options = {key: self.imputer_options[key] for key in ("max_depth", "min_samples_leaf")
                       if key in self.imputer_options}
        return nullimp.make_imputer(self.method, **options)

    def _numeric(self, dataset: Dataset, fit: bool) -> Tuple[np.ndarray, List[str]]:
        names = list(dataset.feature_names)
        if fit:
            self.standardizer.fit(dataset.features, dataset.missing_mask, names)
        table = self.standardizer.transform(dataset.features, dataset.missing_mask)
        if self.imputer is not None:
            if fit:
                self.imputer.fit(table, labels=dataset.labels, feature_names=names)
            table = self.imputer.transform(table)
            names = self.imputer.output_names(names)
        return table, names

    def _categorical(self, dataset: Dataset, fit: bool) -> Tuple[np.ndarray, List[str]]:
        blocks, names = [], []
        for column_name, column in dataset.categoricals.items():
            if fit:
                self.encoders[column_name] = catenc.make_encoder(self.encoding_method, column_name).fit(column)
            encoder = self.encoders[column_name]
            blocks.append(encoder.transform(column))
            names.extend(encoder.state.columns)
        if not blocks:
            return np.empty((dataset.n_rows, 0)), names
        return np.hstack(blocks), names

    def _assemble(self, dataset: Dataset, fit: bool) -> Tuple[np.ndarray, List[str]]:
        numeric, numeric_names = self._numeric(dataset, fit)
        encoded, encoded_names = self._categorical(dataset, fit)
        return np.hstack([numeric, encoded]), numeric_names + encoded_names

    def fit(self, train: Dataset) -> "ArmPipeline":
        self.imputer = self._make_imputer()
        self.encoders = {}
        table, names = self._assemble(train, fit=True)
        self.pre_selection_names = names
        if self.experiment is Experiment.FEATURE_SELECTION:
            n_select = self.n_select if self.n_select is not None else default_n_select(train)
            n_select = min(n_select, table.shape[1])
            self.selection = featsel.select(self.method, table, train.labels, n_select, self.selector_config)
        else:
            self.selection = featsel.select_all(table)
        self.train = train
        logger.debug(f"Fitted {self.experiment.value}/{self.method} pipeline: {len(names)} columns, "
                      f"{len(self.selection.selected)} selected")
        return self

    @check_fitted
    def transform(self, dataset: Dataset) -> np.ndarray:
        table, _ = self._assemble(align_columns(self.train, dataset), fit=False)
        return table[:, list(self.selection.selected)]

    def fit_transform(self, train: Dataset) -> np.ndarray:
        return self.fit(train).transform(train)

    @property
    def output_names(self) -> List[str]:
        return [self.pre_selection_names[j] for j in self.selection.selected]

    @check_fitted
    def manifest(self) -> Dict[str, Any]:
        """Fitted state of every stage, for the run log."""
        ranking = {name: int(rank) for name, rank in zip(self.pre_selection_names, self.selection.ranking)}
        return {
            "method": self.method,
            "standardizer": self.standardizer.to_dict(),
            "imputer": None if self.imputer is None else self.imputer.state.to_dict(),
            "encoders": {name: encoder.state.to_dict() for name, encoder in self.encoders.items()},
            "selection": {
                "method": self.selection.method.value,
                "selected": self.output_names,
                "ranking": ranking,
                "details": dict(self.selection.details),
            },
        }
