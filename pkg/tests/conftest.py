import pytest

from qcw.catalog import Catalog

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def catalog():
    return Catalog()


@pytest.fixture(scope="session")
def qm_p1(catalog):
    return catalog.quantum("p1")


@pytest.fixture(scope="session")
def qm_p1xp1(catalog):
    return catalog.quantum("p1xp1")


@pytest.fixture(scope="session")
def qm_point(catalog):
    return catalog.quantum("point")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
