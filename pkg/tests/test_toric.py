import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import polytope
from syzlab.errors import ConfigError, MalformedFan, NotAmple, ZeroCoordinate
from syzlab.toric import (Fan, fan_from_dict, iota, lattice_points, picard_equal,
                          picard_reduce, polytope_from, superpotential_eval, validate_fan)

CP1_FAN = Fan.from_lists([1, -1], [[0], [1]])
CP2_FAN = Fan.from_lists([(1, 0), (0, 1), (-1, -1)], [(0, 1), (1, 2), (2, 0)])


def test_cp2_fan_smooth_complete():
    rep = validate_fan(CP2_FAN)
    assert rep.ok and rep.complete and all(rep.smooth)
    assert rep.determinants == (1, 1, 1)


def test_cp1_fan_smooth_complete():
    assert validate_fan(CP1_FAN).ok


def test_single_cone_is_incomplete():
    rep = validate_fan(Fan.from_lists([(1, 0), (0, 1)], [(0, 1)]))
    assert not rep.complete and not rep.ok


def test_non_smooth_and_non_primitive_are_flagged():
    rep = validate_fan(Fan.from_lists([(2, 0), (0, 1), (-1, -1)], [(0, 1), (1, 2), (2, 0)]))
    assert rep.primitive == (False, True, True)
    assert rep.smooth[0] is False and rep.determinants[0] == 2


@pytest.mark.parametrize("gens, cones", [
    ([(1, 0), (1, 0)], [(0, 1)]),
    ([(1, 0), (0, 1)], [(0, 5)]),
    ([(0, 0), (0, 1)], [(0, 1)]),
])
def test_malformed_fans(gens, cones):
    with pytest.raises(MalformedFan):
        Fan.from_lists(gens, cones)


def test_cp1_interval():
    P = polytope_from(CP1_FAN, (0, 1))
    assert P.volume == pytest.approx(1.0)
    assert sorted(P.vertices.ravel().tolist()) == [0, 1]


def test_cp2_simplex():
    P = polytope_from(CP2_FAN, (0, 0, 1))
    assert P.volume == pytest.approx(0.5)
    assert sorted(map(tuple, P.vertices.tolist())) == [(0, 0), (0, 1), (1, 0)]


def test_degenerate_interval_not_ample():
    with pytest.raises(NotAmple):
        polytope_from(CP1_FAN, (0, 0))


@pytest.mark.parametrize("name, geo", [
    ("cp1.json", oracles.CP1), ("cp2.json", oracles.CP2),
    ("p1xp1.json", oracles.P1XP1), ("hirzebruch1.json", oracles.HIRZ1),
])
def test_vertices_and_lattice_points_match_brute_force(name, geo):
    P = polytope(name)
    verts = sorted(tuple(float(x) for x in v) for v in P.vertices)
    assert verts == [tuple(float(x) for x in v) for v in oracles.brute_vertices(geo)]
    assert sorted(map(tuple, lattice_points(P).tolist())) == oracles.brute_lattice_points(geo)


def test_lattice_points_small_cases():
    assert lattice_points(polytope_from(CP1_FAN, (0, 1))).ravel().tolist() == [0, 1]
    assert len(lattice_points(polytope_from(CP2_FAN, (0, 0, 2)))) == 6


def test_hirzebruch_facet_volumes():
    # lattice lengths of the four edges: 1, 2, 1, 3 (brute-force gcd)
    P = polytope("hirzebruch1.json")
    assert np.allclose(P.facet_volumes, [1, 2, 1, 3])
    assert P.volume == pytest.approx(2.5)


def test_iota():
    P1 = polytope_from(CP1_FAN, (0, 1))
    P2 = polytope_from(CP2_FAN, (0, 0, 1))
    assert iota(P1, [1]).tolist() == [1, -1]
    assert iota(P2, [1, 0]).tolist() == [1, 0, -1]
    assert iota(P2, [0, 0]).tolist() == [0, 0, 0]


def test_picard():
    P = polytope_from(CP1_FAN, (0, 1))
    assert picard_equal(P, (1, 0), (0, 1))
    assert not picard_equal(P, (1, 0), (2, 0))
    assert picard_reduce(P, (1, 0)).canonical == picard_reduce(P, (0, 1)).canonical


@settings(max_examples=50, deadline=None)
@given(a=st.lists(st.integers(-9, 9), min_size=3, max_size=3),
       u=st.lists(st.integers(-9, 9), min_size=2, max_size=2))
def test_picard_invariant_under_iota(a, u):
    P = polytope_from(CP2_FAN, (0, 0, 1))
    shifted = np.asarray(a) + iota(P, u)
    assert picard_equal(P, a, shifted)
    assert picard_reduce(P, a).canonical == picard_reduce(P, shifted).canonical


def test_superpotential():
    assert superpotential_eval(CP1_FAN, [1.0], offsets=(0, 0)) == pytest.approx(2.0)
    assert abs(superpotential_eval(CP1_FAN, [1j], offsets=(0, 0))) < 1e-15
    P2 = polytope_from(CP2_FAN, (0, 0, 1))
    assert superpotential_eval(P2, [1, 1]) == pytest.approx(2 + np.exp(-1))
    with pytest.raises(ZeroCoordinate):
        superpotential_eval(P2, [0, 1])


def test_fan_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        fan_from_dict({"dim": 1, "generators": [1, -1], "max_cones": [[1], [2]], "colour": 3})
    with pytest.raises(ConfigError):
        fan_from_dict({"dim": 1, "generators": [1.5, -1], "max_cones": [[1], [2]]})
