import pytest

from sandlab import grid_sandpile, line_sandpile


@pytest.fixture(scope="session")
def grid2():
    return grid_sandpile(2)


@pytest.fixture(scope="session")
def grid4():
    return grid_sandpile(4)


@pytest.fixture(scope="session")
def grid8():
    return grid_sandpile(8)


@pytest.fixture(scope="session")
def line2():
    return line_sandpile(2)
