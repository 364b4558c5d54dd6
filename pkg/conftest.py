"""Surface the per-criterion acceptance lines in the terminal summary.

Acceptance tests print one "[acceptance] name: PASS/FAIL" line each; capture
would normally hide them for passing tests, so they are replayed here.
"""

_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for line in report.capstdout.splitlines():
        if line.startswith("[acceptance]"):
            _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance report")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
