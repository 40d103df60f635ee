import math
import warnings

import numpy as np
import pytest

from netmorph.errors import InputError
from netmorph.fanshape import (
    FanSpec,
    build_fan_2d,
    build_fan_nd,
    mu_power,
    slack_measure_bound,
)
from netmorph.netcore import evaluate, structure_metrics
from netmorph.verify import fan_slack_measure


def test_fan_2d_formula():
    spec = FanSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 10.0)
    net = build_fan_2d(spec)
    # relu(x0 - 10 relu(x1))
    assert evaluate(net, [0.5, -0.2]) == 0.5
    assert evaluate(net, [0.5, 0.02]) == pytest.approx(0.3)
    assert evaluate(net, [0.5, 0.2]) == 0.0
    assert evaluate(net, [-0.5, -0.2]) == 0.0


def test_fan_nd_limit_and_metrics():
    rng = np.random.default_rng(3)
    for D in (2, 3, 4):
        P = rng.normal(size=(D, D))
        spec = FanSpec(P, rng.normal(size=D), 1e4)
        net = build_fan_nd(spec)
        m = structure_metrics(net)
        assert (m.width, m.depth) == (D, D)
        x = rng.uniform(-1, 1, (5000, D))
        h = spec.h(x)
        # away from the slack wedges the net equals its limit
        clear = np.all(np.abs(h[:, 1:]) > 1e-2, axis=1)
        np.testing.assert_allclose(evaluate(net, x[clear]), spec.ideal(x[clear]), atol=1e-9)


def test_spec_validation():
    with pytest.raises(InputError):
        FanSpec([[1.0, 2.0], [2.0, 4.0]], [0.0, 0.0])
    with pytest.raises(InputError):
        FanSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 1.0)
    with pytest.raises(InputError):
        FanSpec([[1.0]], [0.0])


def test_mu_power_cap_warns():
    with pytest.warns(RuntimeWarning):
        assert mu_power(1e5, 3) == 1e12
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert mu_power(10.0, 2) == 100.0


def test_slack_bound_2d_value():
    spec = FanSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 100.0)
    assert slack_measure_bound(spec, 1.0) == pytest.approx(2 * math.sqrt(2) / 100)


def test_slack_measure_matches_wedge_area():
    # wedge {x0 > 0, 0 < x1 < x0/mu} in [-1, 1]^2 has area 1/(2 mu)
    mu = 50.0
    spec = FanSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], mu)
    rep = fan_slack_measure(spec, build_fan_2d(spec), ((0.0, 0.0), (1.0, 1.0 / mu)),
                            samples=200_000, seed=3)
    assert abs(rep.absolute_measure - 1 / (2 * mu)) < 4 * rep.absolute_stderr
