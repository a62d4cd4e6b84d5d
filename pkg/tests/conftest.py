"""Collects outcomes of tests tagged ``@pytest.mark.criterion("ACn", "title")`` and prints
one PASS/FAIL line per criterion at the end of the session."""
import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    name, title = mark.args
    ok = report.passed if report.when == "call" else not report.failed
    prev = _RESULTS.get(name, (title, True))
    _RESULTS[name] = (title, prev[1] and ok and not report.skipped)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS, key=lambda s: int(s[2:])):
        title, ok = _RESULTS[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}  {title}")
