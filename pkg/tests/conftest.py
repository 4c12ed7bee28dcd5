import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Recorder for acceptance-suite results; one line per criterion is
    printed in the terminal summary."""
    def record(criterion, ok, detail=""):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        assert ok, f"{criterion}: {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(_ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {criterion}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)
