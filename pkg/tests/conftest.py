import _acceptance_log


def pytest_terminal_summary(terminalreporter):
    if _acceptance_log.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_log.RESULTS:
            terminalreporter.write_line(line)
