# synthdata.py


"""
Synthetic data families for the preprocessing benchmark.

Three functional forms (linear, GAM with global interactions, jumpy GAM with local interactions) come in
three variants: the base form, a categorical-gated form whose term groups are switched on by segment, and a
grouped form that weights three copies of the base form. Features are multivariate normal with correlated
consecutive pairs; noise columns never enter the response; the response is Bernoulli with a sigmoid of the
median-centred latent score.

Randomness: every dataset owns two streams, one derived from `structure_seed` (coefficients, choice of the
features that receive missing values) and one derived from `seed` (rows). Datasets of one family in a
catalog share the structure seed, so they share their generating function.
"""


import os
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from prepbench import metrics
from prepbench.errors import GenerationError, InvalidSpecError, NumericError
from prepbench.static_utils import derive_seed, dump_json, load_json, write_text_atomic


logger = logging.getLogger(__name__)

COEFFICIENT_BOUND = 3.0
BALANCE_RANGE = (0.4, 0.6)
DESK_ROWS = 20_000
FULL_ROWS = 250_000
LABEL_COLUMN = "y"
PROBABILITY_COLUMN = "p_true"
SEGMENT_COLUMN = "cat"
# Term groups switched on by segments 1, 2 and 3 in the gated variant
GATED_TERM_GROUPS = ((0, 1, 2), (3, 4, 5), (6, 7, 8, 9))


class Family(str, Enum):
    LINEAR = "linear"
    GAM_GLOBAL = "gam_global"
    JUMPY_GAM_LOCAL = "jumpy_gam_local"


class Variant(str, Enum):
    BASE = "base"
    CATEGORICAL_GATED = "categorical_gated"
    GROUPED = "grouped"


class Experiment(str, Enum):
    FEATURE_SELECTION = "feature_selection"
    CATEGORICAL_ENCODING = "categorical_encoding"
    NULL_IMPUTATION = "null_imputation"


@dataclass(frozen=True)
class FunctionalForm:
    family: Family
    variant: Variant = Variant.BASE

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def block_size(self) -> int:
        """Number of features one copy of the base form reads."""
        return 5 if self.family is Family.GAM_GLOBAL else 10

    @property
    def n_signal_features(self) -> int:
        return 3 * self.block_size if self.variant is Variant.GROUPED else self.block_size

    @property
    def n_coefficients(self) -> int:
        return 33 if self.variant is Variant.GROUPED else 10

    def to_dict(self) -> Dict[str, str]:
        return {"family": self.family.value, "variant": self.variant.value}

    @classmethod
    def from_dict(cls, data: Mapping[str, str]) -> "FunctionalForm":
        try:
            return cls(Family(data["family"]), Variant(data.get("variant", Variant.BASE.value)))
        except (KeyError, ValueError) as error:
            raise InvalidSpecError(f"Invalid functional form {dict(data)}: {error}") from error


@dataclass(frozen=True)
class CoefficientSet:
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(value) for value in self.values)
        if len(values) == 0:
            raise InvalidSpecError("A coefficient set needs at least one value")
        if any(not (-COEFFICIENT_BOUND <= value <= COEFFICIENT_BOUND) for value in values):
            raise InvalidSpecError(f"Coefficients must lie in [-{COEFFICIENT_BOUND}, {COEFFICIENT_BOUND}]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class NullInjection:
    feature_count: int
    rate: float

    def __post_init__(self):
        if self.feature_count < 0:
            raise InvalidSpecError(f"feature_count must be non-negative, got {self.feature_count}")
        if not 0.0 <= self.rate <= 1.0:
            raise InvalidSpecError(f"Null rate must lie in [0, 1], got {self.rate}")


@dataclass(frozen=True)
class DatasetSpec:
    """Declarative recipe of one synthetic dataset."""
    form: FunctionalForm
    n_rows: int = DESK_ROWS
    n_signal_features: Optional[int] = None
    n_noise_features: int = 0
    n_segments: int = 0
    pair_correlation: float = 0.5
    null_inject: Optional[NullInjection] = None
    seed: int = 0
    structure_seed: Optional[int] = None

    def __post_init__(self):
        if self.n_signal_features is None:
            object.__setattr__(self, "n_signal_features", self.form.n_signal_features)
        self.validate()

    def validate(self) -> None:
        if self.n_rows < 1:
            raise InvalidSpecError(f"n_rows must be positive, got {self.n_rows}")
        if self.n_signal_features != self.form.n_signal_features:
            raise InvalidSpecError(
                f"{self.form.family.value}/{self.form.variant.value} reads {self.form.n_signal_features} "
                f"signal features, spec declares {self.n_signal_features}"
            )
        if self.n_noise_features < 0 or self.n_segments < 0:
            raise InvalidSpecError("Noise feature and segment counts must be non-negative")
        if self.form.variant is Variant.CATEGORICAL_GATED and self.n_segments < 3:
            raise InvalidSpecError(f"The gated variant needs at least 3 segments, got {self.n_segments}")
        if not 0.0 <= self.pair_correlation < 1.0:
            raise InvalidSpecError(f"pair_correlation must lie in [0, 1), got {self.pair_correlation}")
        if self.null_inject is not None and self.null_inject.feature_count > self.n_signal_features:
            raise InvalidSpecError(
                f"Cannot inject missing values into {self.null_inject.feature_count} features, "
                f"only {self.n_signal_features} signal features exist"
            )

    @property
    def effective_structure_seed(self) -> int:
        return self.seed if self.structure_seed is None else self.structure_seed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "form": self.form.to_dict(),
            "n_rows": self.n_rows,
            "n_signal_features": self.n_signal_features,
            "n_noise_features": self.n_noise_features,
            "n_segments": self.n_segments,
            "pair_correlation": self.pair_correlation,
            "null_inject": None if self.null_inject is None else {
                "feature_count": self.null_inject.feature_count, "rate": self.null_inject.rate,
            },
            "seed": self.seed,
            "structure_seed": self.structure_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DatasetSpec":
        if "form" not in data:
            raise InvalidSpecError("Dataset spec is missing 'form'")
        known = {"form", "n_rows", "n_signal_features", "n_noise_features", "n_segments",
                 "pair_correlation", "null_inject", "seed", "structure_seed"}
        unknown = set(data) - known
        if unknown:
            raise InvalidSpecError(f"Unknown dataset spec fields: {sorted(unknown)}")
        kwargs = {key: value for key, value in data.items() if key not in ("form", "null_inject")}
        null_inject = data.get("null_inject")
        try:
            return cls(
                form=FunctionalForm.from_dict(data["form"]),
                null_inject=None if null_inject is None else NullInjection(**null_inject),
                **kwargs,
            )
        except TypeError as error:
            raise InvalidSpecError(f"Malformed dataset spec: {error}") from error


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Materialized table: numeric features (missing cells hold NaN), categorical columns, labels,
    true probabilities and the authoritative missing mask.
    """
    features: np.ndarray
    feature_names: Tuple[str, ...]
    labels: np.ndarray
    missing_mask: np.ndarray
    true_probability: Optional[np.ndarray] = None
    categoricals: Mapping[str, np.ndarray] = field(default_factory=dict)
    noise_flags: Tuple[bool, ...] = ()
    spec: Optional[DatasetSpec] = None
    coefficients: Tuple[CoefficientSet, ...] = ()
    missing_features: Tuple[str, ...] = ()
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.noise_flags:
            object.__setattr__(self, "noise_flags", (False,) * len(self.feature_names))
        for array in (self.features, self.labels, self.missing_mask, self.true_probability, *self.categoricals.values()):
            if isinstance(array, np.ndarray):
                array.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def categorical(self) -> Optional[np.ndarray]:
        """The synthetic segment column, if any."""
        return self.categoricals.get(SEGMENT_COLUMN)

    @property
    def signal_feature_names(self) -> Tuple[str, ...]:
        return tuple(name for name, noise in zip(self.feature_names, self.noise_flags) if not noise)

    @property
    def noise_feature_names(self) -> Tuple[str, ...]:
        return tuple(name for name, noise in zip(self.feature_names, self.noise_flags) if noise)

    def take(self, rows: Sequence[int]) -> "Dataset":
        """Row subset sharing every column role and the recipe."""
        rows = np.asarray(rows, dtype=int)
        return replace(
            self,
            features=self.features[rows].copy(),
            labels=self.labels[rows].copy(),
            missing_mask=self.missing_mask[rows].copy(),
            true_probability=None if self.true_probability is None else self.true_probability[rows].copy(),
            categoricals={name: column[rows].copy() for name, column in self.categoricals.items()},
        )

    def manifest(self) -> Dict[str, Any]:
        return {
            "spec": None if self.spec is None else self.spec.to_dict(),
            "seed": None if self.spec is None else self.spec.seed,
            "structure_seed": None if self.spec is None else self.spec.effective_structure_seed,
            "columns": {
                "features": list(self.feature_names),
                "categorical": {
                    name: "integer" if np.issubdtype(column.dtype, np.integer) else "string"
                    for name, column in self.categoricals.items()
                },
                "label": LABEL_COLUMN,
                "probability": PROBABILITY_COLUMN if self.true_probability is not None else None,
            },
            "noise_flags": list(self.noise_flags),
            "missing_features": list(self.missing_features),
            "coefficients": [list(coefficients.values) for coefficients in self.coefficients],
            "metadata": dict(self.metadata),
        }


# ---------------------------------------------------------------------------------------------- operations


def draw_coefficients(n: int, rng: np.random.Generator) -> CoefficientSet:
    """n weights i.i.d. uniform on [-3, 3]."""
    if n < 1:
        raise InvalidSpecError(f"Cannot draw {n} coefficients")
    return CoefficientSet(tuple(rng.uniform(-COEFFICIENT_BOUND, COEFFICIENT_BOUND, size=n)))


def build_covariance(n_features: int, r: float) -> np.ndarray:
    """
    Block-diagonal covariance: unit diagonal and correlation r inside the consecutive pairs (1,2), (3,4), ...
    With an odd count the last feature is independent of every other.
    """
    if n_features < 1:
        raise InvalidSpecError(f"Covariance needs at least one feature, got {n_features}")
    if abs(r) >= 1.0:
        raise InvalidSpecError(f"|r| must be below 1, got {r}")
    sigma = np.eye(n_features)
    for first in range(0, n_features - 1, 2):
        sigma[first, first + 1] = sigma[first + 1, first] = r
    return sigma


def sample_features(n_rows: int, sigma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rows i.i.d. N(0, sigma) through the Cholesky factor of sigma."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or not np.allclose(sigma, sigma.T):
        raise NumericError("Covariance matrix must be square and symmetric")
    try:
        factor = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as error:
        raise NumericError(f"Covariance decomposition failed: {error}") from error
    standard = rng.standard_normal((n_rows, sigma.shape[0]))
    return standard @ factor.T


def _base_terms(family: Family, beta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """The ten weighted additive terms of one copy of a base form, one column per term."""
    if family is Family.LINEAR:
        return x * beta
    if family is Family.GAM_GLOBAL:
        x1, x2, x3, x4, x5 = (x[:, index] for index in range(5))
        with np.errstate(divide="ignore", over="ignore"):
            return np.column_stack([
                beta[0] * np.abs(x1),
                beta[1] * x2 ** 2,
                beta[2] * np.log(np.abs(x3) + 1.0),
                np.exp(beta[3] * x4),
                1.0 / (beta[4] * np.abs(x5) + 1.0),
                beta[5] * x1 * x2,
                beta[6] * np.abs(x1 * x2 * x3),
                beta[7] * np.log(np.abs(x3 + x4 + x5) + 1.0),
                beta[8] * np.maximum(x4, x5),
                np.exp(beta[9] * (x5 - x3)),
            ])
    x1, x2, x3, x4, x5, x6, x7, x8, x9, x10 = (x[:, index] for index in range(10))
    with np.errstate(divide="ignore", over="ignore"):
        return np.column_stack([
            beta[0] * np.abs(x1) * (np.abs(x1) < 2),
            beta[1] * x2 ** 2 * (x2 > 1),
            beta[2] * np.log(np.abs(x3) + 1.0) * (np.abs(x3) > 1),
            np.exp(beta[3] * x4) * (x4 < 0),
            1.0 / (beta[4] * np.abs(x5) + 1.0),
            beta[5] * np.maximum(1.0, x6 + x7),
            beta[6] * (x7 < 1),
            beta[7] * (np.abs(x8) > 2),
            beta[8] * x9 * (x9 < -1),
            beta[9] * np.maximum(0.0, x10),
        ])


def eval_form(form: FunctionalForm, coeffs: CoefficientSet, features: np.ndarray,
              categorical: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Latent score f(x) of every row: the base equation, its segment-gated version, or the weighted sum of three
    grouped copies. `features` holds the signal columns only, in generation order.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[1] != form.n_signal_features:
        raise InvalidSpecError(
            f"{form.family.value}/{form.variant.value} needs {form.n_signal_features} feature columns, "
            f"got shape {features.shape}"
        )
    if len(coeffs) != form.n_coefficients:
        raise InvalidSpecError(f"{form.family.value}/{form.variant.value} needs {form.n_coefficients} "
                               f"coefficients, got {len(coeffs)}")
    beta = coeffs.as_array()

    if form.variant is Variant.BASE:
        return _base_terms(form.family, beta, features).sum(axis=1)

    if form.variant is Variant.CATEGORICAL_GATED:
        if categorical is None:
            raise InvalidSpecError("The gated variant needs a categorical column")
        categorical = np.asarray(categorical)
        if categorical.shape[0] != features.shape[0]:
            raise InvalidSpecError("Categorical column and features differ in row count")
        absent = [segment for segment in range(1, len(GATED_TERM_GROUPS) + 1) if not np.any(categorical == segment)]
        if absent:
            raise InvalidSpecError(f"The gated variant needs segments 1..{len(GATED_TERM_GROUPS)} present, "
                                   f"missing {absent}")
        terms = _base_terms(form.family, beta, features)
        latent = np.zeros(features.shape[0])
        for segment, group in enumerate(GATED_TERM_GROUPS, start=1):
            gate = categorical == segment
            latent[gate] += terms[gate][:, list(group)].sum(axis=1)
        return latent

    block = form.block_size
    groups = [
        _base_terms(form.family, beta[10 * k:10 * (k + 1)], features[:, block * k:block * (k + 1)]).sum(axis=1)
        for k in range(3)
    ]
    return beta[30] * groups[0] + beta[31] * groups[1] + beta[32] * groups[2]


def to_probability(latent: np.ndarray, center: Optional[float] = None) -> np.ndarray:
    """
    p = sigmoid(f - center). The center defaults to the median of f so that classes come out balanced.

    Raises:
        NumericError: If a latent value is not finite; the message names the first offending row.
    """
    latent = np.asarray(latent, dtype=float)
    bad_rows = np.flatnonzero(~np.isfinite(latent))
    if bad_rows.size:
        raise NumericError(f"Latent score is not finite at row {int(bad_rows[0])} ({bad_rows.size} rows total)")
    if center is None:
        center = float(np.median(latent)) if latent.size else 0.0
    return expit(latent - center)


def sample_labels(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli draws, one per probability."""
    probs = np.asarray(probs, dtype=float)
    if probs.size and (not np.all(np.isfinite(probs)) or probs.min() < 0.0 or probs.max() > 1.0):
        raise NumericError("Probabilities must be finite and lie in [0, 1]")
    return (rng.random(probs.shape[0]) < probs).astype(np.int8)


def add_noise_features(features: np.ndarray, feature_names: Sequence[str], k: int,
                       rng: np.random.Generator) -> Tuple[np.ndarray, Tuple[str, ...], Tuple[bool, ...]]:
    """Appends k standard-normal columns named noise_1..noise_k; returns (table, names, noise flags)."""
    if k < 0:
        raise InvalidSpecError(f"Noise feature count must be non-negative, got {k}")
    features = np.asarray(features, dtype=float)
    names = tuple(feature_names)
    flags = tuple(name.startswith("noise_") for name in names)
    if k == 0:
        return features, names, flags
    noise = rng.standard_normal((features.shape[0], k))
    return (
        np.hstack([features, noise]),
        names + tuple(f"noise_{index}" for index in range(1, k + 1)),
        flags + (True,) * k,
    )


def assign_segments(n_rows: int, n_segments: int, rng: np.random.Generator) -> np.ndarray:
    """
    Segment ids 1..S built from the segment level: every segment gets n_rows // S rows (the first
    n_rows % S segments one more), shuffled into a random row order.
    """
    if n_segments < 1:
        raise InvalidSpecError(f"Need at least one segment, got {n_segments}")
    segments = np.resize(np.arange(1, n_segments + 1, dtype=np.int64), n_rows)
    return rng.permutation(segments)


def inject_missing(dataset: Dataset, feature_count: int, rate: float, rng: np.random.Generator,
                   feature_rng: Optional[np.random.Generator] = None) -> Dataset:
    """
    Chooses `feature_count` signal features uniformly at random (from `feature_rng`, default `rng`) and masks
    every cell of those features independently with probability `rate`. Labels and probabilities are untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise InvalidSpecError(f"Null rate must lie in [0, 1], got {rate}")
    signal_indices = [index for index, noise in enumerate(dataset.noise_flags) if not noise]
    if feature_count > len(signal_indices) or feature_count < 0:
        raise InvalidSpecError(f"Cannot inject missing values into {feature_count} features, "
                               f"{len(signal_indices)} signal features available")
    chooser = feature_rng if feature_rng is not None else rng
    chosen = sorted(int(index) for index in chooser.choice(signal_indices, size=feature_count, replace=False))

    features = np.array(dataset.features, dtype=float)
    mask = np.array(dataset.missing_mask, dtype=bool)
    for index in chosen:
        column_mask = rng.random(dataset.n_rows) < rate
        mask[:, index] |= column_mask
    features[mask] = np.nan
    logger.debug(f"Injected missing values into {[dataset.feature_names[i] for i in chosen]} at rate {rate}")
    return replace(
        dataset,
        features=features,
        missing_mask=mask,
        missing_features=tuple(dataset.feature_names[index] for index in chosen),
    )


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """
    Assigns the functional form, draws coefficients, generates features (signal, segments, noise), creates
    the response, then injects missing values. Pure function of the spec and its seeds.

    Raises:
        GenerationError: If the label mean falls outside [0.4, 0.6].
    """
    spec.validate()
    form = spec.form
    structure_rng = np.random.default_rng(derive_seed(spec.effective_structure_seed, "structure"))
    row_rng = np.random.default_rng(derive_seed(spec.seed, "rows"))

    # Base forms with segments draw one coefficient set per segment
    n_sets = spec.n_segments if (form.variant is Variant.BASE and spec.n_segments > 0) else 1
    coefficient_sets = tuple(draw_coefficients(form.n_coefficients, structure_rng) for _ in range(n_sets))

    signal = sample_features(spec.n_rows, build_covariance(spec.n_signal_features, spec.pair_correlation), row_rng)
    signal_names = tuple(f"x{index}" for index in range(1, spec.n_signal_features + 1))
    categorical = assign_segments(spec.n_rows, spec.n_segments, row_rng) if spec.n_segments > 0 else None
    features, names, noise_flags = add_noise_features(signal, signal_names, spec.n_noise_features, row_rng)

    if n_sets > 1:
        latent = np.zeros(spec.n_rows)
        for segment, coefficients in enumerate(coefficient_sets, start=1):
            rows = categorical == segment
            latent[rows] = eval_form(form, coefficients, signal[rows])
    else:
        latent = eval_form(form, coefficient_sets[0], signal, categorical)
    center = float(np.median(latent))
    probability = to_probability(latent, center)
    labels = sample_labels(probability, row_rng)

    dataset = Dataset(
        features=features,
        feature_names=names,
        labels=labels,
        missing_mask=np.zeros(features.shape, dtype=bool),
        true_probability=probability,
        categoricals={} if categorical is None else {SEGMENT_COLUMN: categorical},
        noise_flags=noise_flags,
        spec=spec,
        coefficients=coefficient_sets,
        metadata={"latent_center": center},
    )
    if spec.null_inject is not None and spec.null_inject.feature_count > 0:
        dataset = inject_missing(dataset, spec.null_inject.feature_count, spec.null_inject.rate, row_rng,
                                 feature_rng=structure_rng)

    balance = float(labels.mean())
    if not BALANCE_RANGE[0] <= balance <= BALANCE_RANGE[1]:
        raise GenerationError(f"Class balance {balance:.3f} outside {BALANCE_RANGE} for seed {spec.seed}")
    logger.debug(f"Generated {form.family.value}/{form.variant.value}: {spec.n_rows} rows, "
                 f"{len(names)} features, balance {balance:.3f}")
    return dataset


def oracle_auc(true_probability: np.ndarray, labels: np.ndarray) -> float:
    """AUC of the generating probabilities used as scores: the ceiling for any model."""
    return metrics.auc(true_probability, labels)


# ---------------------------------------------------------------------------------------------- catalog


@dataclass(frozen=True)
class CatalogPreset:
    n_train: int
    n_validation: int
    n_tuning: int
    n_rows: int


PRESETS = {
    "desk": CatalogPreset(n_train=10, n_validation=2, n_tuning=1, n_rows=DESK_ROWS),
    "full": CatalogPreset(n_train=30, n_validation=3, n_tuning=3, n_rows=FULL_ROWS),
}

# (variant, noise features per family, segments, null injection) per experiment
CATALOG_TABLES = {
    Experiment.NULL_IMPUTATION: (
        Variant.BASE,
        {Family.LINEAR: 5, Family.GAM_GLOBAL: 5, Family.JUMPY_GAM_LOCAL: 5},
        5,
        NullInjection(feature_count=3, rate=0.5),
    ),
    Experiment.CATEGORICAL_ENCODING: (
        Variant.CATEGORICAL_GATED,
        {Family.LINEAR: 5, Family.GAM_GLOBAL: 5, Family.JUMPY_GAM_LOCAL: 5},
        3,
        None,
    ),
    Experiment.FEATURE_SELECTION: (
        Variant.GROUPED,
        {Family.LINEAR: 25, Family.GAM_GLOBAL: 10, Family.JUMPY_GAM_LOCAL: 25},
        0,
        None,
    ),
}


@dataclass(frozen=True)
class DatasetCatalog:
    train: Tuple[DatasetSpec, ...]
    validation: Tuple[DatasetSpec, ...]
    tuning: Tuple[DatasetSpec, ...]


def experiment_spec(experiment: Experiment, family: Family, seed: int = 0, structure_seed: Optional[int] = None,
                    **overrides: Any) -> DatasetSpec:
    """The dataset recipe an experiment uses for one family, before any override."""
    variant, noise, segments, null_inject = CATALOG_TABLES[Experiment(experiment)]
    family = Family(family)
    fields = {
        "form": FunctionalForm(family, variant),
        "n_noise_features": noise[family],
        "n_segments": segments,
        "null_inject": null_inject,
        "seed": seed,
        "structure_seed": structure_seed,
    }
    if "null_inject" in overrides and isinstance(overrides["null_inject"], Mapping):
        overrides = dict(overrides, null_inject=NullInjection(**overrides["null_inject"]))
    fields.update(overrides)
    return DatasetSpec(**fields)


def catalog(experiment: Experiment, family: Family, preset: str = "desk", master_seed: int = 0,
            overrides: Optional[Mapping[str, Any]] = None) -> DatasetCatalog:
    """Train / validation / tuning recipes of one family; all share one structure seed."""
    if preset not in PRESETS:
        raise InvalidSpecError(f"Unknown catalog preset {preset!r}, expected one of {sorted(PRESETS)}")
    counts = PRESETS[preset]
    experiment, family = Experiment(experiment), Family(family)
    overrides = dict(overrides or {})
    overrides.setdefault("n_rows", counts.n_rows)
    structure_seed = derive_seed(master_seed, experiment.value, family.value, "structure")

    def specs(role: str, count: int) -> Tuple[DatasetSpec, ...]:
        return tuple(
            experiment_spec(experiment, family, seed=derive_seed(master_seed, experiment.value, family.value, role, index),
                            structure_seed=structure_seed, **overrides)
            for index in range(count)
        )

    return DatasetCatalog(
        train=specs("train", counts.n_train),
        validation=specs("validation", counts.n_validation),
        tuning=specs("tuning", counts.n_tuning),
    )


def generate_with_retry(spec: DatasetSpec, attempts: int = 5) -> Dataset:
    """Generates a dataset, redrawing rows from a derived seed when the balance or finiteness checks fail."""
    current = spec
    for attempt in range(attempts):
        try:
            return generate_dataset(current)
        except (GenerationError, NumericError) as error:
            logger.warning(f"Attempt {attempt + 1}/{attempts} for seed {current.seed} failed: {error}")
            current = replace(spec, seed=derive_seed(spec.seed, "retry", attempt + 1))
    raise GenerationError(f"No valid dataset after {attempts} attempts from seed {spec.seed}")


# ---------------------------------------------------------------------------------------------- persistence


def save_dataset(dataset: Dataset, directory: str, name: str = "dataset") -> Tuple[str, str]:
    """Writes `<name>.csv` (features, categorical columns, y, p_true; missing cells empty) and `<name>.json`."""
    os.makedirs(directory, exist_ok=True)
    frame = pd.DataFrame(np.asarray(dataset.features), columns=list(dataset.feature_names))
    for column_name, column in dataset.categoricals.items():
        frame[column_name] = column
    frame[LABEL_COLUMN] = np.asarray(dataset.labels, dtype=int)
    if dataset.true_probability is not None:
        frame[PROBABILITY_COLUMN] = dataset.true_probability
    csv_path = os.path.join(directory, f"{name}.csv")
    json_path = os.path.join(directory, f"{name}.json")
    write_text_atomic(csv_path, frame.to_csv(index=False, na_rep="", float_format="%.17g", lineterminator="\r\n"))
    dump_json(json_path, dataset.manifest())
    return csv_path, json_path


def load_dataset(directory: str, name: str = "dataset") -> Dataset:
    manifest = load_json(os.path.join(directory, f"{name}.json"))
    columns = manifest["columns"]
    categorical_types = columns.get("categorical", {})
    dtypes = {column: (str if kind == "string" else np.int64) for column, kind in categorical_types.items()}
    frame = pd.read_csv(os.path.join(directory, f"{name}.csv"), dtype=dtypes, keep_default_na=False, na_values=[""])

    feature_names = tuple(columns["features"])
    features = frame[list(feature_names)].to_numpy(dtype=float)
    probability_column = columns.get("probability")
    spec = None if manifest.get("spec") is None else DatasetSpec.from_dict(manifest["spec"])
    return Dataset(
        features=features,
        feature_names=feature_names,
        labels=frame[columns.get("label", LABEL_COLUMN)].to_numpy(dtype=np.int8),
        missing_mask=np.isnan(features),
        true_probability=None if probability_column is None else frame[probability_column].to_numpy(dtype=float),
        categoricals={column: frame[column].to_numpy() for column in categorical_types},
        noise_flags=tuple(manifest.get("noise_flags", ())),
        spec=spec,
        coefficients=tuple(CoefficientSet(tuple(values)) for values in manifest.get("coefficients", [])),
        missing_features=tuple(manifest.get("missing_features", ())),
        metadata=manifest.get("metadata", {}),
    )


def load_spec(file_path: str) -> DatasetSpec:
    return DatasetSpec.from_dict(load_json(file_path))
