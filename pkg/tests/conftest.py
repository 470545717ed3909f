import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from artdirector.grammar import _backend  # noqa: E402

KERNELS = _backend.available()


@pytest.fixture(params=KERNELS)
def kernel(request):
    return request.param


# acceptance reporting: tests marked criterion(n, title) get one summary line
# per criterion; a criterion passes only if all of its tests pass

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "failed": [], "passed": []})
    (entry["failed"] if report.failed else entry["passed"]).append(item.name)
    for name, value in getattr(item, "user_properties", []):
        if name == "detail":
            entry.setdefault("details", []).append(value)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"criterion {number}: {status}  {entry['title']}"
        if entry["failed"]:
            line += f"  (failing: {', '.join(entry['failed'])})"
        terminalreporter.write_line(line)
        for detail in entry.get("details", []):
            terminalreporter.write_line(f"    {detail}")
