"""Collects tests marked with ``criterion`` and prints one line per criterion."""

from collections import defaultdict

_results = defaultdict(list)
_titles = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_runtest_logreport(report):
    if report.when != "call" and not report.failed:
        return
    for key, value in report.user_properties:
        if key == "criterion":
            number, title = value
            _titles[number] = title
            _results[number].append((report.nodeid, report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        runs = _results[number]
        status = "PASS" if all(ok for _, ok in runs) else "FAIL"
        passed = sum(ok for _, ok in runs)
        terminalreporter.write_line(f"criterion {number} [{status}] {_titles[number]} ({passed}/{len(runs)} checks)")
        for nodeid, ok in runs:
            if not ok:
                terminalreporter.write_line(f"    failed: {nodeid}")
