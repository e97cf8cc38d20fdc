import numpy as np
import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_row_stochastic(edges, rng):
    """Random member of the constraint set on the support of ``edges``."""
    from stark.graph import WeightMatrix

    w = rng.exponential(size=edges.n_edges)
    sums = np.bincount(edges.rows, weights=w, minlength=edges.m)
    return WeightMatrix(edges, w / sums[edges.rows])


def dense_laplacian(Wd):
    m = Wd.shape[0]
    return 0.5 * (np.eye(m) + np.diag(Wd.sum(axis=0))) - 0.5 * (Wd + Wd.T)
