import json
from fractions import Fraction
from pathlib import Path

import pytest

from groundeval import kernels
from groundeval.dataset import data_path

FIXTURE = data_path("fixture")


@pytest.fixture
def fixture_paths():
    return {
        "scenes": FIXTURE / "scenes.jsonl",
        "descriptions": FIXTURE / "descriptions.jsonl",
        "predictions": FIXTURE / "predictions.jsonl",
    }


@pytest.fixture
def expected():
    return json.loads((FIXTURE / "expected.json").read_text())


def frac(s: str) -> float:
    return float(Fraction(s))


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.backend()
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def write_lines(path: Path, records) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def pytest_addoption(parser):
    parser.addoption("--real-data", default=None,
                     help="directory with scenes.jsonl and descriptions.jsonl exported from the full corpus")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
