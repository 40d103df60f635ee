"""Binary-step classifiers for the labels of the 2-6-2-1 fixture."""

from netmorph.classify import classify_transform
from netmorph.fixtures import net_2621
from netmorph.netcore import label_network
from netmorph.verify import mismatch_measure

net = net_2621()
for mode in ("wide", "deep"):
    res = classify_transform(net, mode, 0.02, 3.0)
    rep = mismatch_measure(label_network(net), res.network, 3.0, samples=100_000, labels=True)
    m = res.report["metrics"]
    print(f"{mode}: {res.report['M']} simplices, width {m['width']} depth {m['depth']}, "
          f"label mismatch measure {rep.absolute_measure:.4f}")
