import numpy as np
import pytest

from psdcomplete.sparse_sym import SparseSymMatrix


def random_sparse(n, nnz, rng):
    """Random symmetric pattern with ``nnz`` distinct upper-triangular entries."""
    iu, ju = np.triu_indices(n)
    pick = rng.choice(iu.size, size=min(nnz, iu.size), replace=False)
    return SparseSymMatrix(n, iu[pick], ju[pick], rng.standard_normal(pick.size))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# one line per acceptance criterion, repeated in the terminal summary so it
# shows up even when output capture hides the prints
CRITERIA_LINES = []


def record_criterion(number, ok, message):
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}  {message}"
    CRITERIA_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
