"""Shared pytest hooks.

The acceptance tests print one ``[ACCEPTANCE] name: PASS|FAIL`` line each.
Pytest captures stdout at the file-descriptor level, so lines from passing
tests would otherwise vanish; replay them in a terminal summary section.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for reports in terminalreporter.stats.values():
        for report in reports:
            if getattr(report, "when", None) != "call":
                continue
            for line in getattr(report, "capstdout", "").splitlines():
                if line.startswith("[ACCEPTANCE]") and line not in lines:
                    lines.append(line)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
