import numpy as np
import pytest

from sll import kernels
from sll.mesh import DomainSpec

BACKENDS = ["python"]
try:
    kernels.get_backend("compiled")
    BACKENDS.insert(0, "compiled")
except ImportError:
    pass


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def square():
    return DomainSpec.unit_square()


@pytest.fixture
def disk():
    return DomainSpec.unit_disk()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
