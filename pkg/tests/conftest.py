import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# acceptance criterion id -> "PASS"/"FAIL", filled in by test_acceptance
CRITERIA: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for mark in ("criterion",):
        crit = dict(report.user_properties).get(mark)
        if crit:
            CRITERIA[crit] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(CRITERIA, key=lambda c: int(c.split()[0])):
        terminalreporter.write_line(f"{CRITERIA[crit]}  criterion {crit}")
