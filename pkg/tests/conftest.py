import numpy as np
import pytest

from fraclat import Boundary, Field, LatticeGeometry


@pytest.fixture
def geom_1d():
    return LatticeGeometry(1, 8, Boundary.ZERO_EXTENDED)


@pytest.fixture
def geom_1d_torus():
    return LatticeGeometry(1, 8, Boundary.PERIODIC_WRAP)


@pytest.fixture
def geom_2d_torus():
    return LatticeGeometry(2, 5, Boundary.PERIODIC_WRAP)


def random_fields(geom, count, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return [Field(geom, scale * rng.standard_normal(geom.shape)) for _ in range(count)]
