import pytest

from zenocert.sysio import load_system


@pytest.fixture(scope="session")
def example1():
    return load_system("example1")


@pytest.fixture(scope="session")
def example2():
    return load_system("example2")


@pytest.fixture(scope="session")
def bouncing_ball():
    return load_system("bouncing-ball")
