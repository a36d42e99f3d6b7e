import cases


def pytest_terminal_summary(terminalreporter):
    if cases.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in cases.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
