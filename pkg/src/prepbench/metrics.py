# metrics.py


"""
AUC, overfit gap and the cross-iteration summaries used in every report.

AUC follows the rank (Mann-Whitney) formulation with ties counted as one half.
Summaries are reported as mean +/- 2 sample standard deviations.
"""


import logging
from dataclasses import dataclass, asdict
from typing import Dict, Sequence

import numpy as np
from scipy.stats import rankdata

from prepbench.errors import ArgumentError, UndefinedMetricError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SummaryBand:
    mean: float
    std: float
    lower: float
    upper: float
    n: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Probability that a random positive outscores a random negative, ties counted 1/2.

    Raises:
        UndefinedMetricError: If the labels contain a single class, or lengths differ.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise UndefinedMetricError(f"scores and labels differ in shape: {scores.shape} vs {labels.shape}")
    positives = labels == 1
    n_pos = int(positives.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes in labels")
    ranks = rankdata(scores, method="average")
    u_statistic = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u_statistic / (n_pos * n_neg))


def auc_gap(train_auc: float, test_auc: float) -> float:
    """Overfit gap: training AUC minus testing AUC."""
    return float(train_auc - test_auc)


def summarize(values: Sequence[float]) -> SummaryBand:
    """
    Sample mean and standard deviation (n-1 denominator) of the iterations, with the band mean +/- 2 std.
    A single value gives std 0 and a band collapsed to the point.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ArgumentError("summarize needs at least one value")
    mean = float(values.mean())
    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return SummaryBand(mean=mean, std=std, lower=mean - 2.0 * std, upper=mean + 2.0 * std, n=int(values.size))


def average_rank(rankings: Sequence[Sequence[float]]) -> np.ndarray:
    """Per-feature arithmetic mean of several rankings of the same features."""
    if len(rankings) == 0:
        raise ArgumentError("average_rank needs at least one ranking")
    lengths = {len(ranking) for ranking in rankings}
    if len(lengths) != 1:
        raise ArgumentError(f"Rankings have different lengths: {sorted(lengths)}")
    return np.asarray(rankings, dtype=float).mean(axis=0)
