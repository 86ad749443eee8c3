import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; the assertion in the test decides pass or fail."""

    def record(criterion: int, name: str, ok: bool, detail: str):
        ACCEPTANCE_LINES.append((criterion, f"[{'PASS' if ok else 'FAIL'}] criterion {criterion:>2} {name}: {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
