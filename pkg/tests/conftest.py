"""Shared pytest plumbing: collects acceptance-criterion result lines.

Each acceptance test appends one "criterion N: PASS/FAIL - detail" line via
the ``acceptance_report`` fixture; the terminal-summary hook prints them all
at the end of the run so they are visible even when every test passes.
"""

import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
