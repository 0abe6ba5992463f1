import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geosubgrad import get_problem  # noqa: E402

BUILTINS = ["example1", "example2", "example3", "example4", "abs_norm_d1", "abs_norm_d2"]

ACCEPTANCE_LOG = []


@pytest.fixture(params=BUILTINS)
def builtin(request):
    return get_problem(request.param)


@pytest.fixture
def record_criterion():
    """Record one line per acceptance criterion for the terminal summary."""

    def record(label, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LOG.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
