import warnings

import numpy as np
import pytest

from funss.fda import FunctionalDataset, Grid, center

ACCEPTANCE_LINES = []


def random_dataset(N, L, seed=0, centered=True, weights="uniform"):
    rng = np.random.default_rng(seed)
    if weights == "uniform":
        grid = Grid.uniform(L)
    else:
        pts = np.sort(rng.uniform(0, 1, L)) + np.arange(L) * 1e-3
        grid = Grid(pts, rng.uniform(0.5, 1.5, L) / L)
    data = FunctionalDataset(grid, rng.standard_normal((N, L)) * rng.uniform(0.5, 3, L))
    return center(data) if centered else data


@pytest.fixture
def small():
    return random_dataset(30, 12, seed=1)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
