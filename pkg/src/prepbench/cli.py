# cli.py


"""
Command-line entry point: `prepbench <command> ...`.

    prepbench generate <spec.json> <dir>        generate one synthetic dataset
    prepbench run <experiment.json>             run a test/control experiment
    prepbench report <run-dir>                  write summary tables and plots of a run
    prepbench ingest <csv> <rules.json> <dir>   clean a raw CSV into a dataset

Success prints a one-line JSON record to stdout and exits 0. Failures print `{"error": ..., "message": ...}`
on one line to stderr and exit 1; usage errors exit 2.
"""


import sys
import json
import logging
import argparse
from dataclasses import replace
from typing import Any, Dict, List, Optional

from prepbench import synthdata
from prepbench.errors import PrepBenchError
from prepbench.experiment import ExperimentConfig, run_experiment
from prepbench.ingest import CleaningRules, ingest_csv
from prepbench.logger import setup_logger
from prepbench.report import report


logger = logging.getLogger(__name__)


def _generate(args: argparse.Namespace) -> Dict[str, Any]:
    spec = synthdata.load_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    dataset = synthdata.generate_dataset(spec)
    csv_path, json_path = synthdata.save_dataset(dataset, args.directory, args.name)
    return {"csv": csv_path, "manifest": json_path, "rows": dataset.n_rows, "features": dataset.n_features}


def _run(args: argparse.Namespace) -> Dict[str, Any]:
    config = ExperimentConfig.load(args.config)
    changes: Dict[str, Any] = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.threads is not None:
        changes["n_jobs"] = args.threads
    if args.output is not None:
        changes["output_dir"] = args.output
    if changes:
        config = replace(config, **changes)
    results = run_experiment(config)
    written = {"run_dir": config.output_dir, "runs": len(results), "failures": sum(not r.ok for r in results)}
    if args.report:
        written["report"] = report(config.output_dir)
    return written


def _report(args: argparse.Namespace) -> Dict[str, Any]:
    return report(args.run_dir, args.output)


def _ingest(args: argparse.Namespace) -> Dict[str, Any]:
    rules = CleaningRules.load(args.rules)
    dataset = ingest_csv(args.csv, rules)
    csv_path, json_path = synthdata.save_dataset(dataset, args.directory, args.name)
    return {"csv": csv_path, "manifest": json_path, "ingestion": dataset.metadata["ingestion"]}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="override the master / dataset seed")
    shared.add_argument("--threads", type=int, default=None, help="number of worker processes")
    shared.add_argument("--verbose", action="store_true", help="log to the console as well as logs/debug.log")

    parser = argparse.ArgumentParser(prog="prepbench", description="Tabular preprocessing benchmark engine.")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    generate = commands.add_parser("generate", parents=[shared], help="generate a synthetic dataset")
    generate.add_argument("spec", help="dataset spec JSON file")
    generate.add_argument("directory", help="output directory")
    generate.add_argument("--name", default="dataset", help="base name of the CSV and manifest files")
    generate.set_defaults(handler=_generate)

    run = commands.add_parser("run", parents=[shared], help="run a test/control experiment")
    run.add_argument("config", help="experiment config JSON file")
    run.add_argument("--output", default=None, help="run directory (overrides output_dir)")
    run.add_argument("--report", action="store_true", help="write the report once the run finishes")
    run.set_defaults(handler=_run)

    report_parser = commands.add_parser("report", parents=[shared], help="summarize a finished run")
    report_parser.add_argument("run_dir", help="run directory holding runs.json")
    report_parser.add_argument("--output", default=None, help="report directory (defaults to the run directory)")
    report_parser.set_defaults(handler=_report)

    ingest = commands.add_parser("ingest", parents=[shared], help="clean a raw CSV into a dataset")
    ingest.add_argument("csv", help="raw CSV file")
    ingest.add_argument("rules", help="cleaning rules JSON file")
    ingest.add_argument("directory", help="output directory")
    ingest.add_argument("--name", default="dataset", help="base name of the CSV and manifest files")
    ingest.set_defaults(handler=_ingest)
    return parser


def _fail(error: BaseException) -> int:
    message = str(error).replace("\n", " ")
    print(json.dumps({"error": type(error).__name__, "message": message}), file=sys.stderr)
    return 1


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    setup_logger(console=args.verbose)
    logger.info(f"prepbench {args.command}: {vars(args)}")
    try:
        outcome = args.handler(args)
    except (PrepBenchError, OSError, ValueError, KeyError) as error:
        logger.error(f"{args.command} failed: {type(error).__name__}: {error}")
        return _fail(error)
    print(json.dumps(outcome, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
