"""Slack measure of the 2D fan sigma(x0 - mu sigma(x1)) against mu."""

import math

from netmorph.fanshape import FanSpec, build_fan_2d, slack_measure_bound
from netmorph.verify import fan_slack_measure

for mu in (1e2, 2e2, 1e3, 2e3, 1e4, 2e4):
    spec = FanSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], mu)
    window = ((0.0, 0.0), (1.0, 2.0 / mu))
    rep = fan_slack_measure(spec, build_fan_2d(spec), window, samples=200_000, seed=1)
    print(f"mu={mu:8.0f} slack {rep.absolute_measure:.3e} exact {1 / (2 * mu):.3e} "
          f"bound {slack_measure_bound(spec, 1.0):.3e}")
