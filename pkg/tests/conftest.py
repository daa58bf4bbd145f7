from __future__ import annotations

import pytest

from lirsim.constellation import iridium

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def grid():
    return iridium()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
