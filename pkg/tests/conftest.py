import logging
import sys

import pytest

from transitlink.months import MonthKey
from transitlink.snapshots import GraphSnapshot

M1 = MonthKey(2020, 1)


def graph(edge_weights, month=M1):
    return GraphSnapshot(month, dict(edge_weights))


# Square with one diagonal: a-b, a-c, b-c, b-d, c-d. The reference edge for
# hand-computed index values is (b, c).
SQUARE_DIAG = {
    ("a", "b"): 1,
    ("a", "c"): 1,
    ("b", "c"): 1,
    ("b", "d"): 1,
    ("c", "d"): 1,
}


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


def pytest_terminal_summary(terminalreporter):
    # one verdict line per acceptance criterion, after the run
    for module_name in ("test_acceptance", "tests.test_acceptance"):
        verdicts = getattr(sys.modules.get(module_name), "_VERDICTS", None)
        if verdicts:
            terminalreporter.section("acceptance verdicts")
            for number, (name, verdict) in sorted(verdicts.items()):
                terminalreporter.write_line(f"criterion {number:02d} {name}: {verdict}")
            return
