import pytest

# acceptance verdicts, one line each, printed after the run
VERDICTS = {}


@pytest.fixture
def verdict():
    def record(key, passed, detail):
        VERDICTS[key] = f"{key}: {'PASS' if passed else 'FAIL'} - {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS, key=lambda k: int(k.split()[1])):
        terminalreporter.write_line(VERDICTS[key])
