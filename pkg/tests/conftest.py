import numpy as np
import pytest

from subspace_fp import MembershipTable, SubspaceSet
from subspace_fp.fp_miner import Item

A = -1

# Five points, six subspaces: the worked example used throughout the tests.
Z5_LABELS = [
    [1, 1, 1, A, A, 1],
    [1, 1, 2, 1, A, 1],
    [1, 1, 3, A, 1, 1],
    [2, 2, 4, 2, 1, 1],
    [2, 2, 4, 2, 2, 1],
]
Z5_SUBSPACES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# Item order among equal supports that lays the tree out as drawn in the
# worked example (support-5 item, then the two support-3 items, then ties).
Z5_RANKS = [
    Item(5, 1), Item(0, 1), Item(1, 1), Item(0, 2),
    Item(1, 2), Item(2, 4), Item(4, 1), Item(3, 2),
]

Z5_CLUSTER_A = [Item(5, 1), Item(0, 1), Item(1, 1)]
Z5_CLUSTER_B = [Item(5, 1), Item(0, 2), Item(1, 2), Item(2, 4)]


def z5_table() -> MembershipTable:
    return MembershipTable(np.array(Z5_LABELS), SubspaceSet(Z5_SUBSPACES, 2))


@pytest.fixture
def z5():
    return z5_table()


def z5_csv() -> str:
    head = ",".join("S" + "-".join(map(str, s)) for s in Z5_SUBSPACES)
    rows = [",".join("" if v == A else str(v) for v in row) for row in Z5_LABELS]
    return "\n".join([head, *rows]) + "\n"


# One line per acceptance criterion, printed after the test summary.
CRITERIA: dict[int, str] = {}


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
