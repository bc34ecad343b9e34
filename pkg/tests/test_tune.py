#!/usr/bin/env python3

"""
File: test_tune.py

Tests for the hyperparameter search on cheap synthetic objectives (no model fitting).
"""

import math
import logging

import numpy as np
import pytest

from prepbench import tune
from prepbench.errors import ArgumentError, TuningError
from prepbench.gbtree import BoostConfig
from prepbench.tune import SearchSpace


logger = logging.getLogger(__name__)


def gamma_objective(config: BoostConfig) -> float:
    return -(config.gamma - 2.0) ** 2


def bowl_objective(config: BoostConfig) -> float:
    """Unimodal in all four dimensions."""
    return -((config.gamma - 2.0) ** 2
             + (math.log(config.learning_rate) - math.log(0.05)) ** 2
             + ((config.max_depth - 6) / 4.0) ** 2
             + ((config.n_estimators - 300) / 200.0) ** 2)


@pytest.mark.tune
def test_search_space_corners():
    space = SearchSpace()
    low = space.to_config(np.zeros(4))
    high = space.to_config(np.ones(4))
    assert (low.gamma, low.max_depth, low.n_estimators) == (0.0, 2, 50)
    assert low.learning_rate == pytest.approx(0.01)
    assert (high.gamma, high.max_depth, high.n_estimators) == (5.0, 10, 500)
    assert high.learning_rate == pytest.approx(0.3)


@pytest.mark.tune
def test_search_space_round_trip():
    space = SearchSpace()
    config = BoostConfig(gamma=1.25, learning_rate=0.05, max_depth=7, n_estimators=321)
    back = space.to_config(space.to_point(config))
    assert back.gamma == pytest.approx(1.25)
    assert back.learning_rate == pytest.approx(0.05)
    assert (back.max_depth, back.n_estimators) == (7, 321)


@pytest.mark.tune
def test_search_space_keeps_untuned_fields():
    base = BoostConfig(l2_reg=3.0, min_child_weight=2.0, seed=9)
    config = SearchSpace().to_config([0.5, 0.5, 0.5, 0.5], base)
    assert (config.l2_reg, config.min_child_weight, config.seed) == (3.0, 2.0, 9)


@pytest.mark.tune
def test_search_space_validation():
    with pytest.raises(ArgumentError):
        SearchSpace(gamma=(5.0, 0.0))
    with pytest.raises(ArgumentError):
        SearchSpace(learning_rate=(0.0, 0.3))
    with pytest.raises(ArgumentError):
        SearchSpace.from_dict({"subsample": [0.5, 1.0]})
    space = SearchSpace.from_dict({"max_depth": [3, 5]})
    assert space.max_depth == (3, 5)
    assert SearchSpace.from_dict(space.to_dict()) == space


@pytest.mark.tune
def test_warmup_size():
    assert tune.warmup_size(1) == 1
    assert tune.warmup_size(12) == 5
    assert tune.warmup_size(40) == 10


@pytest.mark.tune
def test_expected_improvement():
    ei = tune.expected_improvement(np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.5, 0.5]), best=0.5)
    assert ei[0] == 0.0
    assert ei[1] > ei[2] > 0.0


@pytest.mark.tune
def test_budget_of_one_returns_the_warmup_trial():
    result = tune.optimize(SearchSpace(), gamma_objective, budget=1, seed=3)
    assert result.budget_used == 1
    assert result.trials[0].phase == "warmup"
    assert result.best_config == result.trials[0].config
    with pytest.raises(ArgumentError):
        tune.optimize(SearchSpace(), gamma_objective, budget=0)


@pytest.mark.tune
def test_same_seed_same_trials():
    first = tune.optimize(SearchSpace(), bowl_objective, budget=8, seed=11, n_candidates=200)
    second = tune.optimize(SearchSpace(), bowl_objective, budget=8, seed=11, n_candidates=200)
    assert [trial.to_dict() for trial in first.trials] == [trial.to_dict() for trial in second.trials]
    assert [trial.phase for trial in first.trials] == ["warmup"] * 5 + ["surrogate"] * 3


@pytest.mark.tune
def test_best_score_is_monotone_in_budget():
    shorter = tune.optimize(SearchSpace(), bowl_objective, budget=8, seed=2, n_candidates=200)
    longer = tune.optimize(SearchSpace(), bowl_objective, budget=12, seed=2, n_candidates=200)
    assert [t.config for t in longer.trials[:8]] == [t.config for t in shorter.trials]
    assert longer.best_score >= shorter.best_score
    assert longer.best_score == max(t.score for t in longer.trials)


@pytest.mark.tune
def test_budgets_with_different_warmups_share_only_the_smaller_warmup():
    assert (tune.warmup_size(8), tune.warmup_size(24)) == (5, 6)
    shorter = tune.optimize(SearchSpace(), bowl_objective, budget=8, seed=2, n_candidates=200)
    longer = tune.optimize(SearchSpace(), bowl_objective, budget=24, seed=2, n_candidates=200)
    assert [t.to_dict() for t in longer.trials[:5]] == [t.to_dict() for t in shorter.trials[:5]]
    assert [t.phase for t in longer.trials] == ["warmup"] * 6 + ["surrogate"] * 18
    assert shorter.trials[5].phase == "surrogate"
    assert longer.best_score >= max(t.score for t in shorter.trials[:5])
    for result in (shorter, longer):
        assert result.best_score == max(t.score for t in result.trials)


@pytest.mark.tune
def test_failed_trials_are_recorded_and_skipped():
    def fragile(config: BoostConfig) -> float:
        if config.max_depth > 6:
            raise RuntimeError("too deep")
        return -config.gamma

    result = tune.optimize(SearchSpace(), fragile, budget=10, seed=0, n_candidates=200)
    failed = [trial for trial in result.trials if trial.failed]
    assert all("too deep" in trial.error for trial in failed)
    assert result.best_config.max_depth <= 6
    assert result.to_dict()["budget_used"] == 10


@pytest.mark.tune
def test_all_failed_trials_raise():
    def broken(config: BoostConfig) -> float:
        return float("nan")

    with pytest.raises(TuningError):
        tune.optimize(SearchSpace(), broken, budget=3)
    with pytest.raises(TuningError):
        tune.random_search(SearchSpace(), broken, budget=3)


@pytest.mark.tune
@pytest.mark.slow
def test_optimize_finds_the_gamma_optimum():
    result = tune.optimize(SearchSpace(), gamma_objective, budget=40, seed=0)
    assert abs(result.best_config.gamma - 2.0) < 0.3


@pytest.mark.tune
@pytest.mark.slow
def test_surrogate_search_beats_random_search():
    guided, uniform = [], []
    for seed in range(20):
        guided.append(tune.optimize(SearchSpace(), bowl_objective, budget=20, seed=seed, n_candidates=500).best_score)
        uniform.append(tune.random_search(SearchSpace(), bowl_objective, budget=20, seed=seed).best_score)
    logger.info(f"median best: guided {np.median(guided):.4f}, random {np.median(uniform):.4f}")
    assert np.median(guided) > np.median(uniform)
