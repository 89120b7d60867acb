import pytest

from pointcount.gestures import build_gesture_table

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def table():
    return build_gesture_table()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
