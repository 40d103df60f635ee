"""Wide and deep networks for a random univariate PWL function."""

import numpy as np

from netmorph.netcore import evaluate, structure_metrics
from netmorph.pwl1d import build_deep, build_wide, random_pwl

rng = np.random.default_rng(0)
f = random_pwl(rng, 12, 2.0)
x = np.linspace(-2, 2, 10_001)
for name, net in (("wide", build_wide(f)), ("deep", build_deep(f))):
    m = structure_metrics(net)
    err = np.max(np.abs(evaluate(net, x[:, None]) - f(x)))
    print(f"{name}: width {m.width:3d} depth {m.depth:3d} max error {err:.1e}")
