import math

import numpy as np
import pytest

from mechfol.hill import find_critical_points
from mechfol.models import build_model

SEED_DIR = (math.cos(0.7), math.sin(0.7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def hh():
    return build_model("henon-heiles")


@pytest.fixture(scope="session")
def hh_saddles(hh):
    return [c for c in find_critical_points(hh) if c.kind == "saddle"]


@pytest.fixture(scope="session")
def v1(hh_saddles):
    return [c for c in hh_saddles if np.allclose(c.location, [0.0, 1.0])][0]


@pytest.fixture(scope="session")
def quad():
    return build_model("saddle-center", {"a": -1.0, "b": 1.0})


@pytest.fixture(scope="session")
def quad_saddle(quad):
    return find_critical_points(quad)[0]


@pytest.fixture(scope="session")
def stark():
    return build_model("stark", {"eps": 0.5})


@pytest.fixture(scope="session")
def chemical():
    return build_model("chemical", {"alpha": 1.0, "beta": 1.0})
