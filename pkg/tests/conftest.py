import os
from pathlib import Path

import numpy as np
import pytest

from robustpulse import TransmonModel

ROOT = Path(__file__).resolve().parent.parent

# campaigns reuse the shipped pulse library unless told otherwise
os.environ.setdefault("ROBUSTPULSE_LIBRARY", str(ROOT / "pulse_library"))


@pytest.fixture(scope="session")
def model():
    return TransmonModel()


@pytest.fixture(scope="session")
def qubit():
    return TransmonModel(num_levels=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
