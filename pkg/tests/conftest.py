import numpy as np
import pytest

import graphsampling as gs


@pytest.fixture
def p3():
    """Unit-weight path on three vertices."""
    return gs.gen_path(3)


@pytest.fixture
def p3_oracle(p3):
    return gs.eigen_oracle(gs.laplacian(p3))


@pytest.fixture(scope="session")
def sensor100():
    g = gs.gen_sensor_knn(100, 8, seed=11)
    lap = gs.laplacian(g)
    return g, lap, gs.eigen_oracle(lap)


@pytest.fixture(scope="session")
def sensor500():
    g = gs.gen_sensor_knn(500, 8, seed=5)
    lap = gs.laplacian(g)
    return g, lap, gs.eigen_oracle(lap)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
