import pytest

# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_RESULTS = []


@pytest.fixture
def record():
    def _record(criterion, name, passed, detail):
        ACCEPTANCE_RESULTS.append((criterion, name, passed, detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, name, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {criterion} {name}: {detail}")
