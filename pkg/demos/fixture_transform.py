"""Transform the 2-6-2-1 fixture and compare the wide and deep results.

The strict comparison (|a - b| > 1e-6) mostly measures float64 noise of
the deep network; the rounding-aware one discounts each network's
rounding-error bound.
"""

from netmorph.fixtures import net_2621
from netmorph.regress import transform
from netmorph.verify import mismatch_measure

net, B, delta = net_2621(), 3.0, 0.02
wide = transform(net, "wide", delta, B)
deep = transform(net, "deep", delta, B)
for res in (wide, deep):
    r = res.report
    print(f"{r['mode']}: M={r['M']} width {r['metrics']['width']} depth {r['metrics']['depth']} "
          f"budget {r['budget']:.3g}")
for aware in (False, True):
    rep = mismatch_measure(wide.network, deep.network, B, samples=50_000, rounding_aware=aware)
    print(f"rounding_aware={aware}: measure {rep.absolute_measure:.4f} (2*delta = {2 * delta})")
