import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# (number, passed, detail) appended by test_acceptance.record
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}")
