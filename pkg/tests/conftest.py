from __future__ import annotations

import pytest

from sand.geometry import RadioParams
from sand.layouts import grid_layout

RESULTS: list[str] = []


def record(criterion: int, ok: bool, detail: str = "") -> None:
    """Print and remember one acceptance line."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
    print(line)
    RESULTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def unit_params():
    return RadioParams.with_range(1.0, 1.0)


@pytest.fixture
def grid_two_faults():
    return grid_layout(3, 3, 1.0, RadioParams.with_range(1.5, 1.5), faulty=[0, 3])
