import pytest

from safemix.histories import Codebook

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def cb2():
    """Two actions, two observations, true rewards {0, 1}, L = 1."""
    return Codebook.build(2, 2, [0, 1], 1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
