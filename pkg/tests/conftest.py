from support import CRITERIA


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
