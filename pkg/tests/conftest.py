import pytest

from nutaxis.driver import run_family

from helpers import make_scenario


@pytest.fixture(scope="session")
def small_plateau_scenario():
    return make_scenario()


@pytest.fixture(scope="session")
def small_plateau_family(small_plateau_scenario):
    return run_family(small_plateau_scenario)
