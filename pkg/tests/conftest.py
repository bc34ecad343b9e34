# conftest.py


import os
import sys
import logging

import numpy as np
import pytest
from termcolor import colored

# Add the source directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))
import prepbench  # noqa: E402
from prepbench import synthdata  # noqa: E402
from prepbench.static_utils import print_banner  # noqa: E402
from prepbench.synthdata import DatasetSpec, Family, FunctionalForm, Variant  # noqa: E402


ROOT_PATH = os.path.dirname(os.path.abspath(__file__))
REDUCED_ROWS = 4000
NA = np.nan

# Toy table shared by the imputation examples (feature 1, feature 2)
IMPUTATION_TOY = np.array([
    [100.0, NA],
    [200.0, 0.30],
    [150.0, 0.60],
    [NA, 0.25],
    [300.0, 0.80],
    [NA, 0.65],
])
# Cluster assignments of the toy rows for the cluster-fill example
IMPUTATION_TOY_CLUSTERS = np.array([1, 2, 2, 2, 1, 1])


logger = logging.getLogger(__name__)


def pytest_addoption(parser):
    parser.addoption("--full-scale", action="store_true",
                     help="PREPBENCH: run the acceptance suites at desk scale (20K rows) instead of reduced rows")


@pytest.fixture(scope="session")
def full_scale(request) -> bool:
    return bool(request.config.getoption("full_scale"))


@pytest.fixture(scope="session")
def acceptance_rows(full_scale) -> int:
    return synthdata.DESK_ROWS if full_scale else REDUCED_ROWS


@pytest.fixture(scope="function", autouse=True)
def print_custom_banner(request):
    test_name = request.node.name
    print("\n" + colored(f"=== START: {test_name} ===", "yellow"))
    yield  # This allows the test to run
    print(colored(f"===  END:  {test_name} ===", "yellow") + "\n")


def pytest_sessionstart(session):
    print_banner(f"prepbench {prepbench.__version__}", f"numpy {np.__version__}")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def imputation_toy() -> np.ndarray:
    return IMPUTATION_TOY.copy()


@pytest.fixture
def imputation_toy_clusters() -> np.ndarray:
    return IMPUTATION_TOY_CLUSTERS.copy()


@pytest.fixture(scope="session")
def linear_dataset():
    """Small linear base dataset with noise columns, shared read-only across tests."""
    spec = DatasetSpec(FunctionalForm(Family.LINEAR, Variant.BASE), n_rows=2000, n_noise_features=5, seed=11)
    return synthdata.generate_with_retry(spec)


@pytest.fixture(scope="session")
def gated_dataset():
    spec = DatasetSpec(FunctionalForm(Family.LINEAR, Variant.CATEGORICAL_GATED), n_rows=2000, n_noise_features=5,
                       n_segments=3, seed=12)
    return synthdata.generate_with_retry(spec)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    report_types = ["passed", "failed", "skipped"]
    reports = {report_type: terminalreporter.getreports(report_type) for report_type in report_types}
    passed, failed, skipped = [reports[status] for status in report_types]

    # A failing setup or teardown shows up next to a passing call
    failed_ids = {report.nodeid for report in failed}
    passed = [report for report in passed if report.nodeid not in failed_ids]
    passed = list({report.nodeid: report for report in passed}.values())
    failed = list({report.nodeid: report for report in failed}.values())
    skipped = list({report.nodeid: report for report in skipped}.values())

    _print_reports(terminalreporter, skipped, "Skipped tests", "yellow")
    _print_reports(terminalreporter, passed, "Successful tests", "green")
    _print_reports(terminalreporter, failed, "Unsuccessful tests", "red")


def _print_reports(terminalreporter, reports, section_title, color):
    if reports:
        terminalreporter.ensure_newline()
        terminalreporter.line("")
        terminalreporter.section(section_title, sep="-", bold=True, **{color: True})
        for report in reports:
            terminalreporter.line(report.nodeid.split(".py::")[-1])
