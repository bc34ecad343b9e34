# tune.py


"""
Hyperparameter search over gamma, learning rate, max depth and number of estimators.

`optimize` evaluates a scrambled Halton warm-up batch, then proposes one configuration at a time by maximizing
expected improvement under a Gaussian-process surrogate of score versus the configuration mapped to the unit
cube. `random_search` is the uniform baseline with the same budget.
"""


import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, qmc
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import ConstantKernel, Matern, WhiteKernel

from prepbench.errors import ArgumentError, TuningError
from prepbench.gbtree import BoostConfig


logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 30
N_CANDIDATES = 2000
EXPLORATION = 0.01

Objective = Callable[[BoostConfig], float]


@dataclass(frozen=True)
class SearchSpace:
    n_dims = 4

    gamma: Tuple[float, float] = (0.0, 5.0)
    learning_rate: Tuple[float, float] = (0.01, 0.3)
    max_depth: Tuple[int, int] = (2, 10)
    n_estimators: Tuple[int, int] = (50, 500)

    def __post_init__(self):
        for name in ("gamma", "learning_rate", "max_depth", "n_estimators"):
            low, high = getattr(self, name)
            if not (math.isfinite(low) and math.isfinite(high)) or low > high:
                raise ArgumentError(f"Invalid bounds for {name}: {(low, high)}")
        if self.learning_rate[0] <= 0 or self.learning_rate[1] > 1:
            raise ArgumentError(f"learning_rate bounds must lie in (0, 1], got {self.learning_rate}")
        if self.gamma[0] < 0 or self.max_depth[0] < 0 or self.n_estimators[0] < 0:
            raise ArgumentError("gamma, max_depth and n_estimators bounds must be non-negative")

    def to_config(self, point: Sequence[float], base: Optional[BoostConfig] = None) -> BoostConfig:
        """Configuration of a point of the unit cube; learning rate on a log scale, integers by equal-width cells."""
        u = np.clip(np.asarray(point, dtype=float), 0.0, 1.0)
        low_lr, high_lr = math.log(self.learning_rate[0]), math.log(self.learning_rate[1])

        def integer(bounds: Tuple[int, int], value: float) -> int:
            low, high = bounds
            return int(min(high, low + math.floor(value * (high - low + 1))))

        return replace(
            base or BoostConfig(),
            gamma=float(self.gamma[0] + u[0] * (self.gamma[1] - self.gamma[0])),
            learning_rate=float(math.exp(low_lr + u[1] * (high_lr - low_lr))),
            max_depth=integer(self.max_depth, u[2]),
            n_estimators=integer(self.n_estimators, u[3]),
        )

    def to_point(self, config: BoostConfig) -> np.ndarray:
        """Unit-cube point of a configuration (integers at the centre of their cell)."""
        def scaled(value: float, bounds: Tuple[float, float]) -> float:
            low, high = bounds
            return 0.0 if high == low else (value - low) / (high - low)

        def cell(value: int, bounds: Tuple[int, int]) -> float:
            low, high = bounds
            return (value - low + 0.5) / (high - low + 1)

        return np.array([
            scaled(config.gamma, self.gamma),
            scaled(math.log(config.learning_rate), (math.log(self.learning_rate[0]), math.log(self.learning_rate[1]))),
            cell(config.max_depth, self.max_depth),
            cell(config.n_estimators, self.n_estimators),
        ])

    def to_dict(self) -> Dict[str, List[float]]:
        return {name: list(getattr(self, name)) for name in ("gamma", "learning_rate", "max_depth", "n_estimators")}

    @classmethod
    def from_dict(cls, data: Mapping[str, Sequence[float]]) -> "SearchSpace":
        unknown = set(data) - {"gamma", "learning_rate", "max_depth", "n_estimators"}
        if unknown:
            raise ArgumentError(f"Unknown search space dimensions: {sorted(unknown)}")
        return cls(**{name: tuple(bounds) for name, bounds in data.items()})


@dataclass(frozen=True)
class Trial:
    config: BoostConfig
    score: Optional[float]
    phase: str
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.score is None

    def to_dict(self) -> Dict[str, Any]:
        return {"config": self.config.to_dict(), "score": self.score, "phase": self.phase, "error": self.error}


@dataclass(frozen=True)
class TuneResult:
    best_config: BoostConfig
    best_score: float
    trials: Tuple[Trial, ...] = field(default_factory=tuple)

    @property
    def budget_used(self) -> int:
        return len(self.trials)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "best_config": self.best_config.to_dict(),
            "best_score": self.best_score,
            "budget_used": self.budget_used,
            "trials": [trial.to_dict() for trial in self.trials],
        }


def _evaluate(objective: Objective, config: BoostConfig, phase: str) -> Trial:
    try:
        score = float(objective(config))
        if not math.isfinite(score):
            raise ValueError(f"objective returned {score}")
        return Trial(config, score, phase)
    except Exception as error:
        logger.warning(f"Trial {config} failed: {error}")
        return Trial(config, None, phase, error=f"{type(error).__name__}: {error}")


def _result(trials: List[Trial]) -> TuneResult:
    successful = [trial for trial in trials if not trial.failed]
    if not successful:
        raise TuningError(f"All {len(trials)} tuning trials failed; first error: {trials[0].error}")
    best = max(successful, key=lambda trial: trial.score)
    logger.info(f"Best trial scored {best.score:.5f} after {len(trials)} trials: {best.config}")
    return TuneResult(best.config, best.score, tuple(trials))


def warmup_size(budget: int) -> int:
    return min(budget, max(5, budget // 4))


def expected_improvement(mean: np.ndarray, std: np.ndarray, best: float, xi: float = EXPLORATION) -> np.ndarray:
    """EI for maximization; 0 where the surrogate is certain."""
    improvement = mean - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        z = improvement / std
        ei = improvement * norm.cdf(z) + std * norm.pdf(z)
    return np.where(std > 0, ei, 0.0)


def _surrogate(seed: int) -> GaussianProcessRegressor:
    kernel = ConstantKernel(1.0) * Matern(length_scale=np.ones(SearchSpace.n_dims), nu=2.5) + WhiteKernel(1e-3)
    return GaussianProcessRegressor(kernel=kernel, normalize_y=True, n_restarts_optimizer=2,
                                    random_state=seed % 2 ** 32)


def optimize(space: SearchSpace, objective: Objective, budget: int = DEFAULT_BUDGET, seed: int = 0,
             base_config: Optional[BoostConfig] = None, n_candidates: int = N_CANDIDATES) -> TuneResult:
    """
    Maximizes `objective` over `space` with `budget` evaluations. Failed trials are recorded and ignored.
    Trials for a smaller budget are a prefix of those for a larger one only when both have the same
    `warmup_size`; otherwise the two runs share just the smaller run's warm-up points.

    Raises:
        TuningError: If every trial failed.
    """
    if budget < 1:
        raise ArgumentError(f"Tuning budget must be at least 1, got {budget}")
    rng = np.random.default_rng(seed)
    n_warmup = warmup_size(budget)
    halton = qmc.Halton(d=SearchSpace.n_dims, scramble=True, seed=seed % 2 ** 32)

    points: List[np.ndarray] = []
    trials: List[Trial] = []
    for point in halton.random(n_warmup):
        points.append(point)
        trials.append(_evaluate(objective, space.to_config(point, base_config), "warmup"))

    for _ in range(budget - n_warmup):
        observed = [(p, t.score) for p, t in zip(points, trials) if not t.failed]
        candidates = rng.random((n_candidates, SearchSpace.n_dims))
        if len(observed) < 2:
            point = candidates[0]
        else:
            x = np.array([p for p, _ in observed])
            y = np.array([score for _, score in observed])
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                model = _surrogate(seed).fit(x, y)
            mean, std = model.predict(candidates, return_std=True)
            point = candidates[int(np.argmax(expected_improvement(mean, std, float(y.max()))))]
        points.append(point)
        trials.append(_evaluate(objective, space.to_config(point, base_config), "surrogate"))
    return _result(trials)


def random_search(space: SearchSpace, objective: Objective, budget: int = DEFAULT_BUDGET, seed: int = 0,
                  base_config: Optional[BoostConfig] = None) -> TuneResult:
    """Uniform random configurations, for comparison with `optimize`."""
    if budget < 1:
        raise ArgumentError(f"Tuning budget must be at least 1, got {budget}")
    rng = np.random.default_rng(seed)
    trials = [_evaluate(objective, space.to_config(point, base_config), "random")
              for point in rng.random((budget, SearchSpace.n_dims))]
    return _result(trials)
