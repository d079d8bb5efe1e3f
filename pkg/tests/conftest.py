import numpy as np
import pytest

from syzlab.kaehler import ToricPotential
from syzlab.toric import Fan, load_geometry_doc, polytope_from, polytope_from_dict

GEOMETRIES = ("cp1.json", "cp2.json", "p1xp1.json", "hirzebruch1.json")


def polytope(name):
    return polytope_from_dict(load_geometry_doc(name))


def potential(name, weights=None):
    return ToricPotential(polytope(name), weights)


@pytest.fixture(scope="session")
def cp1():
    return potential("cp1.json")


@pytest.fixture(scope="session")
def cp2():
    return potential("cp2.json")


@pytest.fixture(scope="session")
def cp2_twice():
    fan = Fan.from_lists([(1, 0), (0, 1), (-1, -1)], [(0, 1), (1, 2), (2, 0)])
    return ToricPotential(polytope_from(fan, (0, 0, 2)))


@pytest.fixture(scope="session")
def hirz():
    return potential("hirzebruch1.json")


@pytest.fixture(scope="session", params=GEOMETRIES)
def any_tp(request):
    return potential(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
