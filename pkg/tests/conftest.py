import pytest

from ionsim import units


@pytest.fixture(scope="session")
def ctx():
    return units.matched_context()
