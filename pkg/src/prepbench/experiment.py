# experiment.py


"""
Test/control experiment orchestration.

An experiment compares preprocessing methods (arms) for one data family. Every arm is tuned once on the
tuning dataset, then each iteration fits the arm's pipeline and a boosted model on a training dataset and
scores a validation dataset. All arms of an iteration read the same datasets. Arm-iterations run as
independent jobs on a joblib worker pool; results come back ordered by (method, iteration).
"""


import os
import time
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from joblib import Parallel, delayed
from sklearn.model_selection import StratifiedShuffleSplit

from prepbench import gbtree, metrics, synthdata
from prepbench.errors import ConfigError, PrepBenchError
from prepbench.featsel import SelectorConfig
from prepbench.gbtree import BoostConfig
from prepbench.preprocess import CONTROL_METHODS, EXPERIMENT_METHODS, ArmPipeline
from prepbench.static_utils import derive_seed, dump_json, load_json, print_banner, worker_count
from prepbench.synthdata import Dataset, Experiment, Family
from prepbench.tune import SearchSpace, TuneResult, optimize


logger = logging.getLogger(__name__)

RUNS_FILE = "runs.json"
TUNING_SPLIT = 0.7


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    family: Family
    methods: Tuple[str, ...] = ()
    iterations: int = 10
    tuning_budget: int = 30
    master_seed: int = 0
    output_dir: str = "runs"
    preset: str = "desk"
    overrides: Mapping[str, Any] = field(default_factory=dict)
    search_space: SearchSpace = field(default_factory=SearchSpace)
    fixed_config: Optional[BoostConfig] = None
    n_select: Optional[int] = None
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    imputer_options: Mapping[str, Any] = field(default_factory=dict)
    datasets: Optional[Mapping[str, Tuple[str, ...]]] = None
    save_datasets: bool = True
    n_jobs: Optional[int] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "experiment", Experiment(self.experiment))
            object.__setattr__(self, "family", Family(self.family))
        except ValueError as error:
            raise ConfigError(str(error)) from error
        control = CONTROL_METHODS[self.experiment]
        methods = tuple(self.methods) or EXPERIMENT_METHODS[self.experiment]
        unknown = [method for method in methods if method not in EXPERIMENT_METHODS[self.experiment]]
        if unknown:
            raise ConfigError(f"Methods {unknown} do not belong to the {self.experiment.value} experiment; "
                              f"expected some of {list(EXPERIMENT_METHODS[self.experiment])}")
        if len(set(methods)) != len(methods):
            raise ConfigError(f"Duplicate methods in {list(methods)}")
        # The control arm always runs, first
        methods = (control,) + tuple(method for method in methods if method != control)
        object.__setattr__(self, "methods", methods)
        if self.iterations < 2:
            raise ConfigError(f"At least 2 iterations are needed for bands, got {self.iterations}")
        if self.fixed_config is None and self.tuning_budget < 1:
            raise ConfigError(f"tuning_budget must be at least 1, got {self.tuning_budget}")
        if self.datasets is not None:
            roles = {role: tuple(paths) for role, paths in self.datasets.items()}
            if not roles.get("train") or not roles.get("validation"):
                raise ConfigError("Explicit datasets need non-empty 'train' and 'validation' lists")
            if self.fixed_config is None and not roles.get("tuning"):
                raise ConfigError("Explicit datasets need a 'tuning' list unless fixed_config is given")
            object.__setattr__(self, "datasets", roles)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "experiment": self.experiment.value,
            "family": self.family.value,
            "methods": list(self.methods),
            "iterations": self.iterations,
            "tuning_budget": self.tuning_budget,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "preset": self.preset,
            "overrides": dict(self.overrides),
            "search_space": self.search_space.to_dict(),
            "fixed_config": None if self.fixed_config is None else self.fixed_config.to_dict(),
            "n_select": self.n_select,
            "selector": self.selector.to_dict(),
            "imputer_options": dict(self.imputer_options),
            "datasets": None if self.datasets is None else {role: list(paths) for role, paths in self.datasets.items()},
            "save_datasets": self.save_datasets,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        data = dict(data)
        for key in ("experiment", "family"):
            if key not in data:
                raise ConfigError(f"Experiment config is missing '{key}'")
        try:
            if data.get("search_space") is not None:
                data["search_space"] = SearchSpace.from_dict(data["search_space"])
            if data.get("fixed_config") is not None:
                data["fixed_config"] = BoostConfig.from_dict(data["fixed_config"])
            if data.get("selector") is not None:
                data["selector"] = SelectorConfig.from_dict(data["selector"])
            data["methods"] = tuple(data.get("methods", ()))
            if data.get("overrides") is None:
                data.pop("overrides", None)
            if data.get("imputer_options") is None:
                data.pop("imputer_options", None)
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError) as error:
            raise ConfigError(f"Invalid experiment config: {error}") from error

    @classmethod
    def load(cls, file_path: str) -> "ExperimentConfig":
        if not os.path.isfile(file_path):
            raise ConfigError(f"Experiment config {file_path} does not exist")
        return cls.from_dict(load_json(file_path))


@dataclass(frozen=True)
class RunResult:
    method: str
    iteration: int
    train_auc: Optional[float]
    test_auc: Optional[float]
    oracle_auc: Optional[float]
    auc_gap: Optional[float]
    manifest: Mapping[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunResult":
        return cls(**data)


@dataclass(frozen=True)
class DatasetBundle:
    train: Tuple[Dataset, ...]
    validation: Tuple[Dataset, ...]
    tuning: Tuple[Dataset, ...]

    def pair(self, iteration: int) -> Tuple[Dataset, Dataset]:
        return self.train[iteration % len(self.train)], self.validation[iteration % len(self.validation)]


def _load_role(paths: Sequence[str]) -> Tuple[Dataset, ...]:
    """Each path is a dataset directory, or a `<dir>/<name>.json` manifest next to its CSV."""
    datasets = []
    for path in paths:
        if path.endswith(".json"):
            directory, file_name = os.path.split(path)
            datasets.append(synthdata.load_dataset(directory or ".", file_name[:-len(".json")]))
        else:
            datasets.append(synthdata.load_dataset(path))
    return tuple(datasets)


def build_datasets(config: ExperimentConfig, run_dir: Optional[str] = None) -> DatasetBundle:
    """Loads the explicit datasets, or generates the family catalog (saved under `datasets/` when asked)."""
    if config.datasets is not None:
        return DatasetBundle(
            train=_load_role(config.datasets["train"]),
            validation=_load_role(config.datasets["validation"]),
            tuning=_load_role(config.datasets.get("tuning", ())),
        )
    recipes = synthdata.catalog(config.experiment, config.family, config.preset, config.master_seed, config.overrides)
    roles = {}
    for role in ("train", "validation", "tuning"):
        specs = getattr(recipes, role)
        if role == "train":
            specs = specs[:config.iterations]
        roles[role] = tuple(synthdata.generate_with_retry(spec) for spec in specs)
        if run_dir is not None and config.save_datasets:
            for index, dataset in enumerate(roles[role]):
                synthdata.save_dataset(dataset, os.path.join(run_dir, "datasets"), f"{role}_{index}")
    logger.info(f"Built {len(roles['train'])} training, {len(roles['validation'])} validation and "
                f"{len(roles['tuning'])} tuning datasets for {config.family.value}")
    return DatasetBundle(**roles)


def _pipeline(config: ExperimentConfig, method: str, seed: int) -> ArmPipeline:
    return ArmPipeline(config.experiment, method, config.selector, config.n_select, config.imputer_options, seed)


def tune_arm(config: ExperimentConfig, method: str, tuning: Dataset) -> TuneResult:
    """
    Tunes the model for one arm: the arm's preprocessing is fitted on the first 70% of the tuning dataset,
    each candidate configuration is scored by validation AUC on the remaining 30%.
    """
    seed = derive_seed(config.master_seed, "tune", method)
    splitter = StratifiedShuffleSplit(n_splits=1, train_size=TUNING_SPLIT, random_state=seed % 2 ** 32)
    fit_rows, score_rows = next(splitter.split(tuning.features, tuning.labels))
    fit_part, score_part = tuning.take(fit_rows), tuning.take(score_rows)
    pipeline = _pipeline(config, method, seed)
    train_table = pipeline.fit_transform(fit_part)
    score_table = pipeline.transform(score_part)

    def objective(boost: BoostConfig) -> float:
        model = gbtree.fit(boost, train_table, fit_part.labels)
        return metrics.auc(gbtree.predict_proba(model, score_table), score_part.labels)

    base = BoostConfig(seed=seed)
    return optimize(config.search_space, objective, config.tuning_budget, seed, base_config=base)


def run_arm_iteration(config: ExperimentConfig, method: str, iteration: int, train: Dataset, validation: Dataset,
                      boost: BoostConfig) -> RunResult:
    """One job: fit the arm on the training dataset, score both datasets. Failures are recorded, not raised."""
    started = time.perf_counter()
    seed = derive_seed(config.master_seed, "job", method, iteration)
    try:
        pipeline = _pipeline(config, method, seed)
        train_table = pipeline.fit_transform(train)
        validation_table = pipeline.transform(validation)
        model = gbtree.fit(replace(boost, seed=seed), train_table, train.labels, feature_names=pipeline.output_names)
        train_auc = metrics.auc(gbtree.predict_proba(model, train_table), train.labels)
        test_auc = metrics.auc(gbtree.predict_proba(model, validation_table), validation.labels)
        oracle = None
        if validation.true_probability is not None:
            oracle = synthdata.oracle_auc(validation.true_probability, validation.labels)
        manifest = pipeline.manifest()
        manifest["model"] = {
            "config": model.config.to_dict(),
            "split_count": dict(zip(pipeline.output_names, model.split_count.tolist())),
            "gain": dict(zip(pipeline.output_names, model.gain_sum.tolist())),
        }
        return RunResult(method, iteration, train_auc, test_auc, oracle, metrics.auc_gap(train_auc, test_auc),
                         manifest, time.perf_counter() - started)
    except (PrepBenchError, ValueError, ArithmeticError) as error:
        logger.error(f"{method} iteration {iteration} failed: {type(error).__name__}: {error}")
        return RunResult(method, iteration, None, None, None, None, {}, time.perf_counter() - started,
                         error=f"{type(error).__name__}: {error}")


def _tune_or_fix(config: ExperimentConfig, method: str, tuning: Sequence[Dataset],
                 run_dir: Optional[str]) -> Tuple[str, Optional[BoostConfig], Optional[str]]:
    if config.fixed_config is not None:
        return method, config.fixed_config, None
    try:
        result = tune_arm(config, method, tuning[0])
    except (PrepBenchError, ValueError, ArithmeticError) as error:
        logger.error(f"Tuning {method} failed: {error}")
        return method, None, f"{type(error).__name__}: {error}"
    if run_dir is not None:
        dump_json(os.path.join(run_dir, "tuning", f"{method}.json"), result.to_dict())
    return method, result.best_config, None


def run_experiment(config: ExperimentConfig, run_dir: Optional[str] = None,
                   bundle: Optional[DatasetBundle] = None) -> List[RunResult]:
    """
    Runs every (method, iteration) of the experiment and writes `runs.json` into `run_dir`
    (default `config.output_dir`; pass an empty string to skip writing).
    """
    run_dir = config.output_dir if run_dir is None else run_dir
    run_dir = run_dir or None
    print_banner(f"{config.experiment.value} on {config.family.value}",
                 f"methods {list(config.methods)}, {config.iterations} iterations, seed {config.master_seed}")
    bundle = bundle or build_datasets(config, run_dir)
    n_jobs = worker_count(config.n_jobs)

    tuned = Parallel(n_jobs=n_jobs)(
        delayed(_tune_or_fix)(config, method, bundle.tuning, run_dir) for method in config.methods
    )
    boosts = {method: boost for method, boost, _ in tuned}
    tuning_errors = {method: error for method, _, error in tuned if error is not None}

    jobs = [(method, iteration) for method in config.methods for iteration in range(config.iterations)
            if method not in tuning_errors]
    computed = Parallel(n_jobs=n_jobs)(
        delayed(run_arm_iteration)(config, method, iteration, *bundle.pair(iteration), boosts[method])
        for method, iteration in jobs
    )
    by_key = {(result.method, result.iteration): result for result in computed}
    results = []
    for method in config.methods:
        for iteration in range(config.iterations):
            if method in tuning_errors:
                results.append(RunResult(method, iteration, None, None, None, None, {}, 0.0,
                                         error=f"tuning failed: {tuning_errors[method]}"))
            else:
                results.append(by_key[(method, iteration)])

    if run_dir is not None:
        write_runs(run_dir, config, results)
    failures = sum(not result.ok for result in results)
    logger.info(f"Experiment finished: {len(results) - failures} runs succeeded, {failures} failed")
    return results


def write_runs(run_dir: str, config: ExperimentConfig, results: Sequence[RunResult]) -> str:
    file_path = os.path.join(run_dir, RUNS_FILE)
    dump_json(file_path, {"config": config.to_dict(), "results": [result.to_dict() for result in results]})
    return file_path


def read_runs(run_dir: str) -> Tuple[Dict[str, Any], List[RunResult]]:
    data = load_json(os.path.join(run_dir, RUNS_FILE))
    return data["config"], [RunResult.from_dict(result) for result in data["results"]]
