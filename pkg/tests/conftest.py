import numpy as np
import pytest

from unifloc.channel import SignalModelParams, bs_ris_channel
from unifloc.dictionary import GridSpec, build_dictionary
from unifloc.geometry import CartesianPoint, RisGeometry


@pytest.fixture(scope="session")
def params():
    return SignalModelParams()


@pytest.fixture(scope="session")
def geom10():
    return RisGeometry.square(10)


@pytest.fixture(scope="session")
def geom2():
    return RisGeometry.square(2)


@pytest.fixture(scope="session")
def dict10(geom10, params):
    return build_dictionary(geom10, GridSpec(), params)


@pytest.fixture(scope="session")
def h_A10(geom10, dict10):
    return bs_ris_channel(geom10, CartesianPoint(4 * dict10.ref_range, 0.0, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_phases(rng, shape):
    return np.exp(2j * np.pi * rng.random(shape))
