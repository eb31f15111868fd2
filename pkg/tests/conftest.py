import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line pass/fail summary for the terminal report."""

    def emit(criterion: str, ok: bool, detail: str = "") -> None:
        _LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
