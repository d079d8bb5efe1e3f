import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from syzlab.errors import ConfigError
from syzlab.fields import ZeroField
from syzlab.metrics import (GuilleminPotential, MetricPotential, curvature_matrix,
                            guillemin_eval, guillemin_grad, guillemin_hess, he_residual,
                            metric_from_dict)

divisors = st.lists(st.integers(-3, 3), min_size=3, max_size=3)
coords = st.floats(-3, 3)


def test_cp1_closed_forms(cp1):
    assert guillemin_eval(cp1, (1, 0), 0.0) == pytest.approx(0.5 * np.log(2), abs=1e-15)
    assert guillemin_grad(cp1, (1, 0), 0.0) == pytest.approx(-0.5, abs=1e-15)
    # g' = -1/(1+e^{2 xi}) at xi = 0.7
    assert guillemin_grad(cp1, (1, 0), 0.7) == pytest.approx(-1 / (1 + np.exp(1.4)), abs=1e-15)


def test_zero_divisor(cp2):
    xi = np.array([0.3, -1.1])
    assert guillemin_eval(cp2, (0, 0, 0), xi) == 0.0
    assert np.all(guillemin_grad(cp2, (0, 0, 0), xi) == 0)
    assert np.all(guillemin_hess(cp2, (0, 0, 0), xi) == 0)


@settings(max_examples=20, deadline=None)
@given(a=divisors, x=coords, y=coords)
def test_guillemin_matches_high_precision(a, x, y, cp2):
    assert guillemin_eval(cp2, a, [x, y]) == pytest.approx(
        float(oracles.guillemin(oracles.CP2, a, [x, y])), abs=1e-12)
    for v in ([1, 0], [0, 1], [-1, -1]):
        d = float(oracles.guillemin_directional(oracles.CP2, a, [x, y], v))
        assert guillemin_grad(cp2, a, [x, y]) @ v == pytest.approx(d, abs=1e-12)


def test_pairing_keeps_precision_far_out(cp2):
    # 2 e^{-2t} (<dg, v_1> + a_1) at t = -14: plain differences lose all digits here
    a, t = (1, 1, 1), -14.0
    g = GuilleminPotential(cp2, a)
    q = 2 * np.exp(-2 * t) * g.pairing([t, 0.0], [1.0, 0.0], a[0])
    ref = float(oracles.condition1_limit(oracles.CP2, a, (0, 1), 0, t=t))
    assert q == pytest.approx(ref, rel=1e-9)


def test_curvature_matrix(cp1, cp2):
    assert curvature_matrix(MetricPotential(cp1, (1, 0)), 0.0) == pytest.approx(0.5)
    assert np.all(curvature_matrix(MetricPotential(cp2, (0, 0, 0)), [0.2, 0.1]) == 0)
    m = MetricPotential(cp2, (0, 0, 0), cp2)
    xi = [0.4, -0.3]
    assert np.allclose(curvature_matrix(m, xi), cp2.hess(xi))


def test_he_residual(cp1, cp2):
    assert he_residual(MetricPotential(cp1, (1, 0)), 0.0, 0.0) == pytest.approx(1.0)
    assert he_residual(MetricPotential(cp2, (0, 0, 0)), 0.0, [1.0, 2.0]) == 0.0
    # g = 3 phi: trace identity gives 3 n - lambda
    m = MetricPotential(cp2, (0, 0, 0), 3.0 * cp2)
    pts = np.random.default_rng(42).uniform(-2, 2, (5, 2))
    assert np.allclose(he_residual(m, 1.0, pts), 5.0, atol=1e-12)


def test_metric_from_dict(cp1):
    m = metric_from_dict({"divisor": [1, 0], "correction": {"type": "zero"}}, cp1)
    assert m.divisor == (1, 0) and m.correction is None
    m = metric_from_dict({"divisor": [1, 0], "correction": {"type": "bumps", "bumps": [
        {"center": [0.0], "radius": 1.0, "amplitude": 0.5}]}}, cp1)
    assert m.potential.value(0.0) == pytest.approx(0.5 * np.log(2) + 0.5)
    m = metric_from_dict({"divisor": [0, 0], "correction": {
        "type": "grid", "box": 2.0, "samples": np.linspace(-2, 2, 9).tolist()}}, cp1)
    assert m.potential.value(0.5) == pytest.approx(0.5)
    for bad in ({"divisor": [1]}, {"divisor": [1, 0.5]}, {"divisor": [1, 0], "extra": 1},
                {"divisor": [1, 0], "correction": {"type": "spline"}}):
        with pytest.raises(ConfigError):
            metric_from_dict(bad, cp1)


def test_zero_metric_potential_is_zero(cp1):
    m = MetricPotential(cp1, (0, 0), ZeroField(1))
    assert m.potential.value(1.3) == 0.0
