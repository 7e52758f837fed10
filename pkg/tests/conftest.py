import pytest

RESULTS = pytest.StashKey[list]()


@pytest.fixture
def criterion(request, capsys):
    """Record and print one pass/fail line for an acceptance check."""
    def record(title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {title}: {detail}"
        request.config.stash.setdefault(RESULTS, []).append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(RESULTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
