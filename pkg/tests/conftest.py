import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# (number, title, passed, seconds, limit) appended by test_acceptance.py
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, seconds, limit in sorted(ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        bound = f" (limit {limit:g} s)" if limit else ""
        terminalreporter.write_line(f"{status} criterion {number}: {title} [{seconds:.2f} s{bound}]")
