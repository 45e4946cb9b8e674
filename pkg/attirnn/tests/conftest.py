"""Terminal-summary plumbing for the forecaster acceptance checklist."""

import ar1util


def pytest_terminal_summary(terminalreporter):
    if ar1util.ACCEPTANCE_LINES:
        terminalreporter.section("forecaster acceptance checklist")
        for line in ar1util.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
