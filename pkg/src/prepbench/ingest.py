# ingest.py


"""
Turns a raw loan-level CSV into a Dataset.

Columns are dropped when their null rate reaches `max_null_rate` or when they are listed as identity or
leakage columns. Columns whose non-missing values all parse as numbers (a trailing % is allowed) become
numeric features; the rest stay categorical strings for the encoders. The target column is mapped to 1 for
the positive label and 0 otherwise. Malformed rows are skipped and counted.
"""


import os
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from prepbench.errors import ConfigError, IngestionError
from prepbench.static_utils import load_json
from prepbench.synthdata import Dataset


logger = logging.getLogger(__name__)

MISSING_TOKENS = ("", "NA", "N/A", "NaN", "nan", "null", "NULL", "None")


@dataclass(frozen=True)
class CleaningRules:
    target_column: str
    positive_label: str = "Charged Off"
    negative_labels: Optional[Tuple[str, ...]] = None
    max_null_rate: float = 0.99
    identity_columns: Tuple[str, ...] = ()
    leakage_columns: Tuple[str, ...] = ()
    categorical_columns: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if not 0.0 < self.max_null_rate <= 1.0:
            raise ConfigError(f"max_null_rate must lie in (0, 1], got {self.max_null_rate}")
        for name in ("negative_labels", "categorical_columns"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, tuple(value))
        object.__setattr__(self, "identity_columns", tuple(self.identity_columns))
        object.__setattr__(self, "leakage_columns", tuple(self.leakage_columns))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target_column": self.target_column,
            "positive_label": self.positive_label,
            "negative_labels": None if self.negative_labels is None else list(self.negative_labels),
            "max_null_rate": self.max_null_rate,
            "identity_columns": list(self.identity_columns),
            "leakage_columns": list(self.leakage_columns),
            "categorical_columns": None if self.categorical_columns is None else list(self.categorical_columns),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CleaningRules":
        if "target_column" not in data:
            raise ConfigError("Cleaning rules need a 'target_column'")
        try:
            return cls(**data)
        except TypeError as error:
            raise ConfigError(f"Invalid cleaning rules: {error}") from error

    @classmethod
    def load(cls, file_path: str) -> "CleaningRules":
        if not os.path.isfile(file_path):
            raise ConfigError(f"Cleaning rules file {file_path} does not exist")
        return cls.from_dict(load_json(file_path))


def _parse_numeric(column: pd.Series) -> Optional[np.ndarray]:
    """Float values with NaN for missing cells, or None if some present value is not a number."""
    stripped = column.str.strip()
    missing = stripped.isin(MISSING_TOKENS)
    present = stripped[~missing].str.rstrip("%")
    parsed = pd.to_numeric(present, errors="coerce")
    if parsed.isna().any():
        return None
    values = np.full(column.shape[0], np.nan)
    values[~missing.to_numpy()] = parsed.to_numpy(dtype=float)
    if np.isinf(values).any():
        return None
    return values


def ingest_csv(file_path: str, rules: CleaningRules) -> Dataset:
    """
    Raises:
        IngestionError: If the file cannot be read, lacks the target column, or has no usable rows.
    """
    bad_lines: List[int] = []

    def skip_bad_line(fields: List[str]) -> None:
        bad_lines.append(len(bad_lines) + 1)
        logger.warning(f"Skipping malformed row with {len(fields)} fields: {fields[:5]}")
        return None

    try:
        frame = pd.read_csv(file_path, dtype=str, keep_default_na=False, engine="python", on_bad_lines=skip_bad_line)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
        raise IngestionError(f"Cannot read {file_path}: {error}") from error
    # Short rows come back padded with NaN
    frame = frame.fillna("")
    frame.columns = [str(column).strip() for column in frame.columns]

    if rules.target_column not in frame.columns:
        raise IngestionError(f"Target column '{rules.target_column}' not found in {file_path}")

    target = frame[rules.target_column].str.strip()
    keep_rows = ~target.isin(MISSING_TOKENS)
    if rules.negative_labels is not None:
        keep_rows &= target.isin((rules.positive_label,) + rules.negative_labels)
    skipped_target = int((~keep_rows).sum())
    frame = frame.loc[keep_rows].reset_index(drop=True)
    if frame.empty:
        raise IngestionError(f"No usable rows in {file_path}")
    labels = (target[keep_rows].to_numpy() == rules.positive_label).astype(np.int8)

    dropped: Dict[str, str] = {}
    numeric: Dict[str, np.ndarray] = {}
    categorical: Dict[str, np.ndarray] = {}
    for column_name in frame.columns:
        if column_name == rules.target_column:
            continue
        if column_name in rules.identity_columns:
            dropped[column_name] = "identity"
            continue
        if column_name in rules.leakage_columns:
            dropped[column_name] = "leakage"
            continue
        column = frame[column_name]
        null_rate = float(column.str.strip().isin(MISSING_TOKENS).mean())
        if null_rate >= rules.max_null_rate:
            dropped[column_name] = f"null_rate {null_rate:.4f}"
            continue
        values = None
        if rules.categorical_columns is None or column_name not in rules.categorical_columns:
            values = _parse_numeric(column)
        if values is not None:
            numeric[column_name] = values
        else:
            text = column.str.strip()
            categorical[column_name] = text.where(~text.isin(MISSING_TOKENS), None).to_numpy(dtype=object)

    for column_name, reason in dropped.items():
        logger.info(f"Dropped column '{column_name}': {reason}")
    feature_names = tuple(numeric)
    features = np.column_stack([numeric[name] for name in feature_names]) if numeric else np.empty((len(frame), 0))
    report = {
        "source": os.path.basename(file_path),
        "rows": int(len(frame)),
        "skipped_rows": len(bad_lines) + skipped_target,
        "malformed_rows": len(bad_lines),
        "rows_without_target": skipped_target,
        "dropped_columns": dropped,
        "positive_rate": float(labels.mean()),
    }
    logger.info(f"Ingested {file_path}: {len(frame)} rows, {len(feature_names)} numeric and {len(categorical)} "
                f"categorical columns, {len(dropped)} dropped, {report['skipped_rows']} rows skipped")
    return Dataset(
        features=features,
        feature_names=feature_names,
        labels=labels,
        missing_mask=np.isnan(features),
        categoricals=categorical,
        metadata={"ingestion": report, "rules": rules.to_dict()},
    )
