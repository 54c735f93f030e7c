ACCEPTANCE_PREFIX = "tests/test_acceptance.py::test_criterion_"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = report.nodeid.replace("\\", "/")
            if "test_acceptance.py::test_criterion_" in nodeid:
                outcomes[nodeid] = status
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid in sorted(outcomes):
        name = nodeid.split("::", 1)[1]
        verdict = "PASS" if outcomes[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}")
