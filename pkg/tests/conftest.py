import pytest


def pytest_configure(config):
    config._acceptance = {}


@pytest.fixture
def record_criterion(request):
    """Store a one-line verdict for an acceptance criterion."""

    def record(number, title, passed, detail):
        request.config._acceptance[number] = (title, passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, passed, detail = results[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} [{verdict}] {title}: {detail}")
