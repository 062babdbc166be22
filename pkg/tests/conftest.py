"""Prints one pass/fail line per acceptance criterion after the run."""

import pytest

_criteria: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(tag, description): acceptance criterion")


def pytest_runtest_logreport(report):
    item_info = _criteria.get(report.nodeid)
    if item_info is None:
        return
    if report.failed or (report.when == "call" and report.outcome == "passed" and item_info["outcome"] is None):
        item_info["outcome"] = "FAIL" if report.failed else "PASS"


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            tag, desc = mark.args
            _criteria[item.nodeid] = {"tag": tag, "desc": desc, "outcome": None}


def pytest_terminal_summary(terminalreporter):
    ran = [c for c in _criteria.values() if c["outcome"] is not None]
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for c in ran:
        terminalreporter.write_line(f"{c['tag']:<5} {c['outcome']}  {c['desc']}")
