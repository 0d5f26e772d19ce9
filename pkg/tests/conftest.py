import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

#: criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE_LOG = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LOG):
        title, passed, detail = ACCEPTANCE_LOG[k]
        terminalreporter.write_line(f"criterion {k} {'PASS' if passed else 'FAIL'}: {title} | {detail}")
