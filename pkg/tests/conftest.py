import pytest

from lomaxfit.dataio import wind_data

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def wind():
    return wind_data()


@pytest.fixture
def record():
    """Store the one-line verdict of an acceptance criterion."""

    def _record(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
