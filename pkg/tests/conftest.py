"""Shared pytest wiring.

Collects the outcome of every test in test_acceptance.py and prints one
PASS/FAIL line per criterion at the end of the run, so the acceptance
status is readable without scrolling through the full report.
"""

import pytest

_ACCEPTANCE_FILE = "test_acceptance.py"
_results: dict[str, str] = {}
_order: list[str] = []


def pytest_collection_modifyitems(items):
    for item in items:
        if _ACCEPTANCE_FILE in str(item.fspath):
            name = item.name
            if name not in _order:
                _order.append(name)


def pytest_runtest_logreport(report):
    if _ACCEPTANCE_FILE not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call":
        _results[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and not report.passed:
        _results[name] = "FAIL" if report.failed else "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _order:
        return
    terminalreporter.section("acceptance")
    for name in _order:
        outcome = _results.get(name, "NOT RUN")
        terminalreporter.write_line(f"ACCEPTANCE {name}: {outcome}")


@pytest.fixture
def tmp_out(tmp_path):
    """A per-test output directory as a string path."""
    out = tmp_path / "out"
    return str(out)
