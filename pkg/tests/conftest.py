"""Shared test fixtures.

The acceptance tests each record exactly one ``[criterion-N] PASS/FAIL``
line; the collected lines print as a terminal section after the run so
the verdicts are visible without scrolling through tracebacks.
"""

import pytest

_criterion_lines = []


@pytest.fixture
def criterion():
    """Record a one-line verdict for an acceptance criterion, then assert it."""

    def _check(number: int, passed: bool, detail: str) -> None:
        line = f"[criterion-{number}] {'PASS' if passed else 'FAIL'} {detail}"
        _criterion_lines.append(line)
        assert passed, line

    return _check


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
