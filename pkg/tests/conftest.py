import pytest

from carpetdim import make_sierpinski, perturb_carpet, solve_full_dimension


@pytest.fixture(scope="session")
def S1():
    return make_sierpinski(0.2, 0.45, (3, 2))


@pytest.fixture(scope="session")
def S1eps(S1):
    return perturb_carpet(S1, 0.05, seed=1).spec


@pytest.fixture(scope="session")
def sol_S1(S1):
    return solve_full_dimension(S1)


@pytest.fixture(scope="session")
def sol_S1eps(S1eps):
    return solve_full_dimension(S1eps)
