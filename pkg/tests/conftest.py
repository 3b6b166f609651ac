"""Shared test plumbing: the acceptance-criteria summary block."""

import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    """Append one [PASS]/[FAIL] line to the summary, then assert."""

    def _record(name: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _record
