import pytest

_VERDICTS = {}


@pytest.fixture(scope="session")
def verdict():
    """Record (and echo) one pass/fail line per acceptance criterion."""

    def record(number, name, ok, detail=""):
        line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _VERDICTS[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])
