import numpy as np
import pytest

from lel.domains import DomainSpec


@pytest.fixture(scope="session")
def disk():
    return DomainSpec.unit_disk()


@pytest.fixture(scope="session")
def square():
    return DomainSpec.square()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
