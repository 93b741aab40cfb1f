import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[{status}] {name}" + (f" -- {detail}" if detail else "")
    _ACCEPTANCE_RESULTS.append((name, line))
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


@pytest.fixture
def small_dataset():
    from sbsskit import SpatialDataset

    rng = np.random.default_rng(7)
    coords = rng.uniform(0, 100, (40, 2))
    values = rng.normal(size=(40, 3))
    return SpatialDataset(coords, values, ["a", "b", "c"])
