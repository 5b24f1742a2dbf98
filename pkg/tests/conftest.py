import pytest

_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line (SKIP when ``ok`` is None); the test itself still asserts."""
    def record(name, ok, detail=""):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"{status}  {name}" + (f": {detail}" if detail else "")
        _LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
