# catenc.py


"""
Categorical encoders: one-hot, reverse Helmert, frequency and binary.

Every encoder is fitted on one training column and can then transform any column. The category order is the
order of first appearance in the training column. Missing categorical values are the category "NA".
A category never seen at fit time encodes to zeros (0.0 for frequency) and raises an UnseenCategoryWarning.
"""


import logging
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Type

import numpy as np
import pandas as pd

from prepbench.errors import ArgumentError, FitError, UnseenCategoryWarning, check_fitted


logger = logging.getLogger(__name__)

MISSING_CATEGORY = "NA"


class EncodingMethod(str, Enum):
    ONEHOT = "onehot"
    HELMERT = "helmert"
    FREQUENCY = "frequency"
    BINARY = "binary"


@dataclass(frozen=True, eq=False)
class EncoderState:
    """Fitted encoder: the category order and the row of output values of each category."""
    method: EncodingMethod
    feature: str
    category_order: Tuple[str, ...]
    table: np.ndarray

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(f"{self.feature}__{self.method.value}_{k}" for k in range(1, self.table.shape[1] + 1))

    @property
    def width(self) -> int:
        return int(self.table.shape[1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "feature": self.feature,
            "category_order": list(self.category_order),
            "table": self.table.tolist(),
            "columns": list(self.columns),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EncoderState":
        method = EncodingMethod(data["method"])
        table = np.asarray(data["table"], dtype=float).reshape(len(data["category_order"]), -1)
        return cls(method, data["feature"], tuple(data["category_order"]), table)


def as_categories(column: Sequence[Any]) -> np.ndarray:
    """Column as strings, missing values mapped to "NA"."""
    series = pd.Series(column, dtype=object)
    return series.where(series.notna(), MISSING_CATEGORY).astype(str).to_numpy()


class CategoricalEncoder(ABC):
    """
    Base class of the encoders. Subclasses only build the output table from the category counts,
    which are given in first-appearance order.
    """
    method: EncodingMethod

    def __init__(self, feature: str = "cat"):
        self.feature = feature
        self.state: Optional[EncoderState] = None

    @property
    def is_fitted(self) -> bool:
        return self.state is not None

    @abstractmethod
    def _build_table(self, counts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fit(self, column: Sequence[Any]) -> "CategoricalEncoder":
        values = as_categories(column)
        if values.size == 0:
            raise FitError(f"Cannot fit a {self.method.value} encoder on an empty column '{self.feature}'")
        order = pd.unique(values)
        counts = pd.Series(values).value_counts(sort=False).reindex(order).to_numpy(dtype=float)
        table = np.asarray(self._build_table(counts), dtype=float)
        table.flags.writeable = False
        self.state = EncoderState(self.method, self.feature, tuple(str(category) for category in order), table)
        logger.debug(f"Fitted {self.method.value} on '{self.feature}': {len(order)} categories -> {table.shape[1]} columns")
        return self

    @check_fitted
    def transform(self, column: Sequence[Any]) -> np.ndarray:
        return transform(self.state, column)

    def fit_transform(self, column: Sequence[Any]) -> np.ndarray:
        return self.fit(column).transform(column)


class OneHotEncoder(CategoricalEncoder):
    """One indicator column per fitted category."""
    method = EncodingMethod.ONEHOT

    def _build_table(self, counts: np.ndarray) -> np.ndarray:
        return np.eye(counts.size)


class HelmertReverseEncoder(CategoricalEncoder):
    """
    Contrast j (1..N-1) compares category j+1 with the mean of categories 1..j:
    categories 1..j get -1/(j+1), category j+1 gets j/(j+1), later categories 0.
    """
    method = EncodingMethod.HELMERT

    def _build_table(self, counts: np.ndarray) -> np.ndarray:
        n_categories = counts.size
        table = np.zeros((n_categories, max(n_categories - 1, 0)))
        for j in range(1, n_categories):
            table[:j, j - 1] = -1.0 / (j + 1)
            table[j, j - 1] = j / (j + 1)
        return table


class FrequencyEncoder(CategoricalEncoder):
    """Relative frequency of the category in the training column."""
    method = EncodingMethod.FREQUENCY

    def _build_table(self, counts: np.ndarray) -> np.ndarray:
        return (counts / counts.sum()).reshape(-1, 1)


class BinaryEncoder(CategoricalEncoder):
    """Binary digits (most significant first) of the 1-based fit-order index, width ceil(log2(N+1))."""
    method = EncodingMethod.BINARY

    def _build_table(self, counts: np.ndarray) -> np.ndarray:
        n_categories = counts.size
        width = int(n_categories).bit_length()
        codes = np.arange(1, n_categories + 1)
        shifts = np.arange(width - 1, -1, -1)
        return ((codes[:, None] >> shifts[None, :]) & 1).astype(float)


ENCODERS: Dict[EncodingMethod, Type[CategoricalEncoder]] = {
    EncodingMethod.ONEHOT: OneHotEncoder,
    EncodingMethod.HELMERT: HelmertReverseEncoder,
    EncodingMethod.FREQUENCY: FrequencyEncoder,
    EncodingMethod.BINARY: BinaryEncoder,
}


def make_encoder(method: Any, feature: str = "cat") -> CategoricalEncoder:
    try:
        return ENCODERS[EncodingMethod(method)](feature)
    except ValueError as error:
        raise ArgumentError(f"Unknown encoding method {method!r}") from error


def fit(method: Any, column: Sequence[Any], feature: str = "cat") -> EncoderState:
    return make_encoder(method, feature).fit(column).state


def transform(state: EncoderState, column: Sequence[Any]) -> np.ndarray:
    """Encoded rows; categories unseen at fit time map to the all-zero row."""
    values = as_categories(column)
    codes = pd.Categorical(values, categories=list(state.category_order)).codes
    unseen = codes < 0
    if unseen.any():
        categories = sorted(set(values[unseen]))
        message = (f"{int(unseen.sum())} rows of '{state.feature}' hold categories unseen at fit time "
                   f"{categories[:10]}; encoded as zeros")
        logger.warning(message)
        warnings.warn(message, UnseenCategoryWarning, stacklevel=2)
    # Index -1 selects the appended zero row
    padded = np.vstack([state.table, np.zeros((1, state.width))])
    return padded[codes].copy()
