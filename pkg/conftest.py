"""Shared test plumbing: the acceptance verdict echo.

Criterion tests append one PASS/FAIL line each; printing them from a
terminal-summary hook keeps them visible under default output capture.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
