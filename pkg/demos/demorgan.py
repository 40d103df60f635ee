"""De Morgan family: deep chain, wide complement and mixed plans agree off the ramps."""

import numpy as np

from netmorph.classify import (
    ArchitecturePlan,
    build_demorgan_deep,
    build_demorgan_wide,
    build_mixed,
    ramp_width,
)
from netmorph.fixtures import random_interval_rules
from netmorph.netcore import evaluate, structure_metrics

rules = random_interval_rules(np.random.default_rng(3), 4, 0.05)
ramp = ramp_width(rules)
x = np.linspace(0, 1, 2001)[:, None]
deep = build_demorgan_deep(rules, ramp)
nets = {
    "all deep": deep,
    "all wide": build_demorgan_wide(rules, ramp),
    "2 wide + 2 deep": build_mixed(rules, ArchitecturePlan(((0, 1),), ((2, 3),)), ramp),
}
for name, net in nets.items():
    m = structure_metrics(net)
    diff = np.max(np.abs(evaluate(net, x) - evaluate(deep, x)))
    print(f"{name:16s} width {m.width:3d} depth {m.depth:3d} max diff vs deep {diff:.1e}")
