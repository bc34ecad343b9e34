# report.py


"""
Report tables and band plots for a finished run.

`report` reads the run log and writes, next to it:

    summary.csv    per method, mean / std / mean +/- 2 std of test AUC, train AUC and the overfit gap,
                   plus the mean oracle AUC and the mean selected-feature count
    rankings.csv   average pre-selection feature rank per method (feature-selection experiments)
    runs.json      the full run log
    plots/         one SVG band plot per method and one combining all methods

SVG files carry their plotted numbers in a leading `<!-- data: ... -->` comment. Reports are deterministic,
so re-running `report` on the same run directory rewrites identical files.
"""


import io
import os
import json
import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from prepbench import metrics  # noqa: E402
from prepbench.errors import ReportError  # noqa: E402
from prepbench.experiment import RUNS_FILE, RunResult, read_runs  # noqa: E402
from prepbench.static_utils import dump_json, to_jsonable, write_text_atomic  # noqa: E402
from prepbench.synthdata import Experiment  # noqa: E402


logger = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
RANKINGS_FILE = "rankings.csv"
PLOTS_DIR = "plots"
COMBINED_PLOT = "all_methods.svg"
SUMMARY_METRICS = ("test_auc", "train_auc", "auc_gap")

PLOT_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 9,
    "font.family": "sans-serif",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.5,
    "svg.fonttype": "none",
    "svg.hashsalt": "prepbench",
}


def _to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\r\n", float_format="%.17g")


def _successful(results: Sequence[RunResult]) -> Dict[str, List[RunResult]]:
    """Successful runs per method, in first-appearance order of the methods."""
    by_method: Dict[str, List[RunResult]] = {}
    for result in results:
        by_method.setdefault(result.method, [])
        if result.ok:
            by_method[result.method].append(result)
    for method in [method for method, runs in by_method.items() if not runs]:
        logger.warning(f"Method {method} has no successful runs; left out of the report")
        del by_method[method]
    if not by_method:
        raise ReportError(f"No successful runs among {len(results)} results")
    return by_method


def summary_table(results: Sequence[RunResult]) -> pd.DataFrame:
    failures: Dict[str, int] = {}
    for result in results:
        failures[result.method] = failures.get(result.method, 0) + (not result.ok)

    rows = []
    for method, runs in _successful(results).items():
        row: Dict[str, Any] = {"method": method, "n": len(runs), "failures": failures[method]}
        for name in SUMMARY_METRICS:
            band = metrics.summarize([getattr(run, name) for run in runs])
            row.update({f"{name}_{key}": value for key, value in band.to_dict().items() if key != "n"})
        oracles = [run.oracle_auc for run in runs if run.oracle_auc is not None]
        row["oracle_auc_mean"] = float(np.mean(oracles)) if oracles else np.nan
        selected = [len(run.manifest["selection"]["selected"]) for run in runs if "selection" in run.manifest]
        row["selected_mean"] = float(np.mean(selected)) if selected else np.nan
        rows.append(row)
    return pd.DataFrame(rows)


def rankings_table(results: Sequence[RunResult]) -> pd.DataFrame:
    """
    One row per pre-selection feature, one average-rank column per method.

    Raises:
        ReportError: If the runs of one method ranked different feature sets.
    """
    columns: Dict[str, np.ndarray] = {}
    features: List[str] = []
    for method, runs in _successful(results).items():
        frame = pd.DataFrame([run.manifest["selection"]["ranking"] for run in runs])
        if frame.isna().to_numpy().any():
            raise ReportError(f"Runs of {method} ranked different feature sets")
        for name in frame.columns:
            if name not in features:
                features.append(name)
        columns[method] = pd.Series(metrics.average_rank(frame.to_numpy()), index=frame.columns)
    table = pd.DataFrame({"feature": features})
    for method, ranks in columns.items():
        table[method] = ranks.reindex(features).to_numpy()
    return table


def _svg(fig: plt.Figure, data: Mapping[str, Any]) -> str:
    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    text = buffer.getvalue()
    comment = f"<!-- data: {json.dumps(to_jsonable(data), sort_keys=True)} -->\n"
    # The comment goes after the XML declaration and doctype
    head, separator, body = text.partition("<svg")
    return head + comment + separator + body


def method_plot(method: str, runs: Sequence[RunResult]) -> str:
    """Train and test AUC per iteration with the mean +/- 2 std test band and the oracle line."""
    iterations = [run.iteration for run in runs]
    test = [run.test_auc for run in runs]
    train = [run.train_auc for run in runs]
    oracles = [run.oracle_auc for run in runs if run.oracle_auc is not None]
    band = metrics.summarize(test)

    with plt.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots()
        ax.axhspan(band.lower, band.upper, color="tab:blue", alpha=0.15, label="test mean ± 2 std")
        ax.axhline(band.mean, color="tab:blue", linestyle="-", linewidth=1.0)
        ax.plot(iterations, test, "o", color="tab:blue", label="test AUC")
        ax.plot(iterations, train, "s", color="tab:orange", markerfacecolor="none", label="train AUC")
        if oracles:
            ax.axhline(float(np.mean(oracles)), color="black", linestyle="--", label="oracle AUC")
        ax.set_xlabel("iteration")
        ax.set_ylabel("AUC")
        ax.set_title(method)
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        return _svg(fig, {"method": method, "iteration": iterations, "test_auc": test, "train_auc": train,
                          "band": band.to_dict(), "oracle_auc": oracles})


def combined_plot(summary: pd.DataFrame, title: str) -> str:
    """Test AUC mean with mean +/- 2 std error bars for every method, control first."""
    positions = np.arange(len(summary))
    means = summary["test_auc_mean"].to_numpy()
    errors = 2.0 * summary["test_auc_std"].to_numpy()
    oracle = summary["oracle_auc_mean"].dropna()

    with plt.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(positions, means, yerr=errors, fmt="o", capsize=4, color="tab:blue", label="test AUC")
        if not oracle.empty:
            ax.axhline(float(oracle.mean()), color="black", linestyle="--", label="oracle AUC")
        ax.set_xticks(positions)
        ax.set_xticklabels(summary["method"], rotation=30, ha="right")
        ax.set_ylabel("AUC")
        ax.set_title(title)
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        return _svg(fig, {"method": summary["method"].tolist(), "test_auc_mean": means, "band_half_width": errors,
                          "oracle_auc": None if oracle.empty else float(oracle.mean())})


def report(source: Union[str, Sequence[RunResult]], out_dir: Optional[str] = None,
           config: Optional[Mapping[str, Any]] = None) -> Dict[str, str]:
    """
    Writes the report files for a run directory or an in-memory list of results. Returns the written paths.

    Raises:
        ReportError: If there is no successful run, or the run log cannot be read.
    """
    if isinstance(source, str):
        if not os.path.isfile(os.path.join(source, RUNS_FILE)):
            raise ReportError(f"No {RUNS_FILE} in {source}")
        try:
            config, results = read_runs(source)
        except (ValueError, KeyError, TypeError) as error:
            raise ReportError(f"Cannot read the run log in {source}: {error}") from error
        out_dir = out_dir or source
    else:
        results = list(source)
        if out_dir is None:
            raise ReportError("An output directory is needed when reporting in-memory results")
    config = dict(config or {})

    written: Dict[str, str] = {}
    summary = summary_table(results)
    written["summary"] = os.path.join(out_dir, SUMMARY_FILE)
    write_text_atomic(written["summary"], _to_csv(summary))

    selection_runs = [result for result in results if result.ok and "selection" in result.manifest]
    if config.get("experiment") == Experiment.FEATURE_SELECTION.value and selection_runs:
        written["rankings"] = os.path.join(out_dir, RANKINGS_FILE)
        write_text_atomic(written["rankings"], _to_csv(rankings_table(selection_runs)))

    written["runs"] = os.path.join(out_dir, RUNS_FILE)
    dump_json(written["runs"], {"config": config or None, "results": [result.to_dict() for result in results]})

    for method, runs in _successful(results).items():
        written[f"plot:{method}"] = os.path.join(out_dir, PLOTS_DIR, f"{method}.svg")
        write_text_atomic(written[f"plot:{method}"], method_plot(method, runs))
    title = " / ".join(str(config[key]) for key in ("experiment", "family") if config.get(key)) or "test AUC"
    written["plot:combined"] = os.path.join(out_dir, PLOTS_DIR, COMBINED_PLOT)
    write_text_atomic(written["plot:combined"], combined_plot(summary, title))

    logger.info(f"Report for {len(summary)} methods written to {out_dir}")
    return written
