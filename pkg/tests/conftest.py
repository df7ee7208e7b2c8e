"""Collects one PASS/FAIL line per acceptance criterion and prints them at the end of the run."""

import pytest

CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        CRITERIA.setdefault(number, []).append((ok, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        for _, line in CRITERIA[number]:
            terminalreporter.write_line(line)
