import support


def pytest_terminal_summary(terminalreporter):
    if not support.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(support.ACCEPTANCE):
        terminalreporter.write_line(support.acceptance_line(number))
