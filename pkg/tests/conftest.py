from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# Nine-label example (0-indexed); rows 1 and 4 are identical.
NINE_LABEL_ROWS = [
    (0, 5, 6, 7),
    (1, 3, 4, 6, 7),
    (0, 2, 5, 7),
    (0, 1, 4),
    (1, 3, 4, 6, 7),
    (0, 2, 5),
    (1, 3, 4, 5, 6),
    (0, 1, 2, 4, 5, 6, 7),
]
FOUR_LABEL_ROWS = [(0, 1, 2), (0, 1, 3), (0, 2, 3)]


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
