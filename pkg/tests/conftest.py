import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drmco import problems  # noqa: E402

CRITERIA = {}


def record_criterion(number, title, passed, detail=""):
    """Remember one acceptance line; printed again in the terminal summary."""
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
    if detail:
        line += f"  [{detail}]"
    CRITERIA[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number])


@pytest.fixture(scope="session")
def small_inventory():
    """Three-stage demand instance with two products and two atoms per stage."""
    inst, sampler = problems.build_inventory_demand({"J": 2, "T": 3}, data_seed=0, n=2)
    return inst, sampler


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
