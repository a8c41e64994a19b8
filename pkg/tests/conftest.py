"""Shared test plumbing.

The acceptance tests record one verdict line each; the terminal summary
prints them all so a full run ends with a readable scorecard.
"""

import pytest

_CRITERIA = []


@pytest.fixture
def criterion():
    """Returns a recorder: criterion(number, passed, detail, elapsed)."""

    def record(number, passed, detail, elapsed=None):
        _CRITERIA.append((number, bool(passed), detail, elapsed))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail, elapsed in sorted(_CRITERIA):
        verdict = "PASS" if passed else "FAIL"
        clock = f"  [{elapsed:.1f}s]" if elapsed is not None else ""
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {detail}{clock}")
