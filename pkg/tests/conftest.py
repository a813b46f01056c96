import pytest

_REPORT: list[tuple[str, bool, str]] = []


class CriterionLog:
    def __init__(self, name):
        self.name = name
        self.detail = ""

    def note(self, detail):
        self.detail = detail


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; its outcome is printed in the summary."""
    marker = request.node.get_closest_marker("criterion")
    log = CriterionLog(marker.args[0] if marker else request.node.name)
    yield log
    failed = getattr(request.node, "_call_failed", True)
    _REPORT.append((log.name, not failed, log.detail))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item._call_failed = rep.failed


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _REPORT:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
