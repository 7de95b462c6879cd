import numpy as np
import pytest

from bufsched.catalog import Catalog, QuerySpec, AccessDescriptor, RelationKind, RelationMeta


@pytest.fixture
def small_catalog():
    return Catalog([
        RelationMeta(0, "R", RelationKind.BASE, 4),
        RelationMeta(1, "S", RelationKind.BASE, 6),
        RelationMeta(2, "I", RelationKind.INDEX, 2),
    ])


def motivating_workload():
    """Five one-block relations b1..b5; q1 reads (b1,b2), q2 (b4,b5), q3 (b2,b3)."""
    cat = Catalog([RelationMeta(i, f"b{i}", RelationKind.BASE, 1) for i in range(1, 6)])
    full = AccessDescriptor.full()
    q1 = QuerySpec(1, 1, {1: full, 2: full})
    q2 = QuerySpec(2, 2, {4: full, 5: full})
    q3 = QuerySpec(3, 3, {2: full, 3: full})
    return cat, [q1, q2, q3]


@pytest.fixture
def motivating():
    return motivating_workload()


_REPORT: list = []


@pytest.fixture
def report():
    """Collects one measured line per acceptance criterion for the terminal summary."""
    return _REPORT.append


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance measurements")
        for line in _REPORT:
            terminalreporter.write_line(line)
