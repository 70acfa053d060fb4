"""Terminal reporting for the acceptance battery: one PASS/FAIL line per
acceptance test, printed in a dedicated summary section."""

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call":
        _ACCEPTANCE[report.nodeid] = report.outcome
    elif report.outcome != "passed" and report.nodeid not in _ACCEPTANCE:
        _ACCEPTANCE[report.nodeid] = report.outcome  # setup error or skip


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance battery")
    for nodeid, outcome in _ACCEPTANCE.items():
        name = nodeid.split("::")[-1]
        label = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{label}  {name}")
