import pytest

from cqnls.solver.grid import make_grid
from cqnls.solver.ground_state import reference_constants


@pytest.fixture(scope="session")
def ref():
    return reference_constants()


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(32.0, 1023)


@pytest.fixture(scope="session")
def fine_grid():
    return make_grid(64.0, 8191)
