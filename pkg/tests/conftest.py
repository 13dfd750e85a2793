import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Record and immediately print one acceptance verdict line."""
    def emit(criterion: int, ok, detail: str):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        line = f"criterion {criterion:>2}: {status}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
