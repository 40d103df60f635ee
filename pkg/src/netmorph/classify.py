"""Classification constructions.

Binary-step indicator networks over rule simplices (a wide and a deep
form), ramped De Morgan networks over hypercube rules (deep chain, wide
complement form and mixed plans), and the classification transform that
turns a thresholded ReLU network into a step network.

Binary step: ``z(t) = 1`` for ``t >= 0`` and 0 otherwise, so rule regions
are closed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from netmorph.errors import (
    InfeasibleParametersError,
    InputError,
    NetworkParseError,
    UnsupportedNetworkError,
)
from netmorph.fanshape import MU_POWER_CAP, box_constant
from netmorph.geometry import (
    Hypercube,
    Simplex,
    SimplicialCover,
    clip_halfplane,
    enumerate_regions_2d,
    polygon_area,
    triangulate,
)
from netmorph.netcore import (
    Activation,
    NetworkBuilder,
    compose_stack,
    constant_network,
    label_network,
    structure_metrics,
)

STEP = Activation.STEP

# ------------------------------------------------------------------ rules


def _as_simplex(rule):
    """Simplex rules pass through; a 1D hypercube [a, b] becomes a segment."""
    if isinstance(rule, Simplex):
        return rule
    if isinstance(rule, Hypercube) and rule.dim == 1:
        return Simplex([[rule.lo[0]], [rule.hi[0]]])
    raise InputError("step constructions need simplex rules (or 1D intervals)")


def _gap(r1, r2):
    """L-infinity gap between two hypercubes (negative when interiors overlap)."""
    lo1, hi1, lo2, hi2 = map(np.asarray, (r1.lo, r1.hi, r2.lo, r2.hi))
    return float(np.max(np.maximum(lo2 - hi1, lo1 - hi2)))


@dataclass(frozen=True)
class RuleSystem:
    """Disjoint rule regions; label 1 inside any rule and 0 elsewhere."""

    rules: tuple
    D: int

    def __post_init__(self):
        rules = tuple(self.rules)
        object.__setattr__(self, "rules", rules)
        for r in rules:
            if not isinstance(r, (Hypercube, Simplex)):
                raise InputError("rules must be Hypercube or Simplex objects")
            if r.dim != self.D:
                raise InputError(f"rule of dimension {r.dim} in a D={self.D} system")
        cubes = [r for r in rules if isinstance(r, Hypercube)]
        for i in range(len(cubes)):
            for j in range(i + 1, len(cubes)):
                if _gap(cubes[i], cubes[j]) < 0:
                    raise InputError(f"hypercube rules {i} and {j} overlap")

    @property
    def n(self):
        return len(self.rules)

    def indicator(self, x):
        x = np.atleast_2d(x)
        out = np.zeros(x.shape[0], dtype=bool)
        for r in self.rules:
            out |= r.contains(x)
        return out.astype(float)

    def to_document(self):
        docs = []
        for r in self.rules:
            if isinstance(r, Hypercube):
                docs.append({"type": "hypercube", "lo": list(r.lo), "hi": list(r.hi)})
            else:
                docs.append({"type": "simplex", "vertices": r.vertices.tolist()})
        return {"D": self.D, "rules": docs}

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict) or "D" not in doc or "rules" not in doc:
            raise NetworkParseError("expected an object with 'D' and 'rules'")
        rules = []
        for i, raw in enumerate(doc["rules"]):
            where = f"rules/{i}"
            try:
                kind = raw["type"]
                if kind == "hypercube":
                    rules.append(Hypercube(raw["lo"], raw["hi"]))
                elif kind == "simplex":
                    rules.append(Simplex(raw["vertices"]))
                else:
                    raise InputError(f"unknown rule type {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise NetworkParseError(str(exc), where) from exc
        try:
            return cls(tuple(rules), int(doc["D"]))
        except InputError as exc:
            raise NetworkParseError(str(exc), "rules") from exc


@dataclass(frozen=True)
class ArchitecturePlan:
    """Partition of rule indices into wide groups and deep groups."""

    wide_groups: tuple = ()
    deep_groups: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "wide_groups", tuple(tuple(g) for g in self.wide_groups))
        object.__setattr__(self, "deep_groups", tuple(tuple(g) for g in self.deep_groups))
        if any(not g for g in self.wide_groups + self.deep_groups):
            raise InputError("plan groups must be non-empty")

    @classmethod
    def all_deep(cls, n):
        return cls((), (tuple(range(n)),))

    @classmethod
    def all_wide(cls, n):
        return cls((tuple(range(n)),), ())

    def validate(self, n):
        flat = sorted(i for g in self.wide_groups + self.deep_groups for i in g)
        if flat != list(range(n)):
            raise InputError(f"plan groups must partition rule indices 0..{n - 1}")

    def to_document(self):
        return {"wide": [list(g) for g in self.wide_groups],
                "deep": [list(g) for g in self.deep_groups]}


# ------------------------------------------------------- binary-step nets


def _step_wide_block(builder, simplex):
    G, h = simplex.facets()
    gates = [builder.add(builder.affine(g, 0.0), c, STEP) for g, c in zip(G, h)]
    return builder.add([(z, 1.0) for z in gates], -float(len(gates)), STEP)


def build_step_wide(rules, D=None):
    """H1(x) = 1 iff x lies in a (closed) rule simplex.

    Each block is ``z(sum_i z(l_i(x)) - (D+1))`` with the facet functionals
    ``l_i``: width D+1, depth 2.  Several blocks are summed and passed
    through ``z(. - 1)`` so that points on shared faces still give 1.
    """
    simplices = [_as_simplex(r) for r in rules]
    if not simplices:
        if D is None:
            raise InputError("an empty rule list needs D")
        return constant_network(D)
    dim = simplices[0].dim
    builder = NetworkBuilder(dim)
    outs = [_step_wide_block(builder, s) for s in simplices]
    if len(outs) == 1:
        return builder.build([(outs[0], 1.0)])
    top = builder.add([(o, 1.0) for o in outs], -1.0, STEP)
    return builder.build([(top, 1.0)])


def step_deep_mu(delta, D, B, K):
    """mu with 1/(mu - 1) = delta / (2 C K), half the strict bound."""
    if not delta > 0:
        raise InputError("delta must be positive")
    mu = 1.0 + 2.0 * box_constant(D, B) * max(K, 1) / delta
    if mu > MU_POWER_CAP:
        min_delta = delta * mu / MU_POWER_CAP
        raise InfeasibleParametersError(
            f"delta={delta:g} needs mu={mu:.3g} above the cap {MU_POWER_CAP:g}",
            min_delta=min_delta,
        )
    return mu


def _step_deep_block(simplex, mu):
    """Chain F_1 = z(l_0 - mu z(-l_1)), F_j = z(F_{j-1} - 1 - mu z(-l_j)).

    Only F_1 carries slack (where l_0 >= mu but l_1 < 0); later links
    are exact because F_{j-1} - 1 is 0 or -1.  Width D+1, depth D+1.
    """
    G, h = simplex.facets()
    builder = NetworkBuilder(simplex.dim)
    gates = [builder.add(builder.affine(-g, 0.0), -c, STEP) for g, c in zip(G[1:], h[1:])]
    out = builder.add(builder.affine(G[0], 0.0) + [(gates[0], -mu)], h[0], STEP)
    for gate in gates[1:]:
        out = builder.add([(out, 1.0), (gate, -mu)], -1.0, STEP)
    return builder.build([(out, 1.0)])


def build_step_deep(rules, mu, D=None):
    """Stacked binary-step fan chains, thresholded by ``z(sum - 1)``."""
    simplices = [_as_simplex(r) for r in rules]
    if not simplices:
        if D is None:
            raise InputError("an empty rule list needs D")
        return constant_network(D)
    if not mu >= 2:
        raise InputError("mu must be at least 2")
    blocks = [_step_deep_block(s, float(mu)) for s in simplices]
    if len(blocks) == 1:
        return blocks[0]
    return label_network(compose_stack(blocks), threshold=1.0)


# ------------------------------------------------------------ De Morgan


def ramp_width(rules, eps=None):
    """Ramp width for De Morgan networks over hypercube ``rules``.

    Without ``eps`` this is a quarter of the smallest gap between rules
    (the 1D default).  With ``eps`` it is also capped by the quoted bound
    (1 - (eps/2)^(1/n)) / 2 and by the width at which the total ramp
    volume, sum_i vol(cube_i grown by r) - vol(cube_i), reaches eps/2.
    The quoted bound alone does not control the ramp volume.
    """
    cubes = list(rules)
    if not cubes:
        raise InputError("need at least one rule")
    gaps = [_gap(a, b) for i, a in enumerate(cubes) for b in cubes[i + 1 :]]
    sides = [min(np.subtract(c.hi, c.lo)) for c in cubes]
    width = (min(gaps) if gaps else min(sides)) / 4.0
    if eps is None:
        return width
    if not 0 < eps < 2:
        raise InputError("eps must lie in (0, 2)")
    width = min(width, (1.0 - (eps / 2.0) ** (1.0 / len(cubes))) / 2.0)

    def ramp_volume(r):
        return sum(np.prod(np.subtract(c.hi, c.lo) + 2 * r) - np.prod(np.subtract(c.hi, c.lo))
                   for c in cubes)

    if ramp_volume(width) > eps / 2:
        width = brentq(lambda r: ramp_volume(r) - eps / 2, 0.0, width)
    return float(width)


def _cubes(rules, ramp):
    if not ramp > 0:
        raise InputError("ramp width must be positive")
    cubes = []
    for r in rules:
        if not isinstance(r, Hypercube):
            raise InputError("De Morgan constructions need hypercube rules")
        cubes.append(r)
    if cubes and any(c.dim != cubes[0].dim for c in cubes):
        raise InputError("rules differ in dimension")
    for i in range(len(cubes)):
        for j in range(i + 1, len(cubes)):
            g = _gap(cubes[i], cubes[j])
            if g < 0:
                raise InputError(f"rules {i} and {j} overlap")
            if g <= 2 * ramp:
                raise InputError(f"rules {i} and {j} are closer than twice the ramp width")
    return cubes


def _outside(builder, cube, level):
    """Edges of u(x) = sum_k relu(lo_k - x_k) + relu(x_k - hi_k) (0 inside)."""
    terms = []
    for k, (a, b) in enumerate(zip(cube.lo, cube.hi)):
        x = builder.input(k, level)
        terms.append((builder.add([(x, -1.0)], a), 1.0))
        terms.append((builder.add([(x, 1.0)], -b), 1.0))
    return terms


def _scaled(terms, s):
    return [(src, w * s) for src, w in terms]


def _clamp(builder, terms, bias):
    """relu(t) - relu(t - 1): clamp of the affine t to [0, 1], as readout terms."""
    hi = builder.add(terms, bias)
    lo = builder.add(terms, bias - 1.0)
    return [(hi, 1.0), (lo, -1.0)]


def _trapezoid(builder, cube, ramp, level=0):
    """T = relu(1 - u/ramp): 1 on the cube, 0 beyond the ramp."""
    return builder.add(_scaled(_outside(builder, cube, level), -1.0 / ramp), 1.0)


def _deep_chain(builder, cubes, ramp):
    """s_i = clamp(s_{i-1} + T_i)."""
    state, level = [], 0
    for cube in cubes:
        trap = _trapezoid(builder, cube, ramp, level)
        state = _clamp(builder, state + [(trap, 1.0)], 0.0)
        level = builder.level_of(state[0][0])
    return state


def _wide_group(builder, cubes, ramp):
    """clamp(1 - (sum_i notA_i - (n - 1))) with the trap-like notA_i = 1 - T_i.

    notA_i is the affine image of one ReLU, so its constant folds into the
    output bias, 1 + (n - 1) - n = 0, and the output neuron reads the T_i
    directly; off the ramps every term is an exact 0 or 1.
    """
    nots = [(_trapezoid(builder, cube, ramp), -1.0) for cube in cubes]
    n = len(cubes)
    return _clamp(builder, _scaled(nots, -1.0), 1.0 + (n - 1) - n)


def _rule_dim(rules, D):
    if rules:
        return rules[0].dim
    if D is None:
        raise InputError("an empty rule list needs D")
    return D


def build_demorgan_deep(rules, ramp, D=None):
    """A_1 or ... or A_n as a chain of ramped trapezoids (ramp width ``ramp``)."""
    cubes = _cubes(rules, ramp)
    dim = _rule_dim(cubes, D)
    if not cubes:
        return constant_network(dim)
    builder = NetworkBuilder(dim)
    return builder.build(_deep_chain(builder, cubes, ramp))


def build_demorgan_wide(rules, ramp, D=None):
    """not(notA_1 and ... and notA_n) = clamp(1 - (sum notA_i - (n - 1)))."""
    cubes = _cubes(rules, ramp)
    dim = _rule_dim(cubes, D)
    if not cubes:
        return constant_network(dim)
    builder = NetworkBuilder(dim)
    return builder.build(_wide_group(builder, cubes, ramp))


def build_mixed(rules, plan, ramp, D=None):
    """Sum of wide groups and deep chains, clamped to [0, 1].

    A plan with a single group reduces to the plain wide or deep network.
    """
    cubes = _cubes(rules, ramp)
    plan.validate(len(cubes))
    dim = _rule_dim(cubes, D)
    if not cubes:
        return constant_network(dim)
    builder = NetworkBuilder(dim)
    groups = [_wide_group(builder, [cubes[i] for i in g], ramp) for g in plan.wide_groups]
    groups += [_deep_chain(builder, [cubes[i] for i in g], ramp) for g in plan.deep_groups]
    if len(groups) == 1:
        return builder.build(groups[0])
    return builder.build(_clamp(builder, [t for g in groups for t in g], 0.0))


# ------------------------------------------------------------- transform


@dataclass
class ClassifyResult:
    network: object
    rules: RuleSystem
    report: dict


def _positive_intervals(net, B):
    from netmorph.pwl1d import extract_pwl

    f = extract_pwl(net, B)
    knots = f.breakpoints
    vals = f.knot_values
    spans = []
    for x0, x1, v0, v1 in zip(knots[:-1], knots[1:], vals[:-1], vals[1:]):
        if v0 >= 0 and v1 >= 0:
            lo, hi = x0, x1
        elif v0 >= 0:
            lo, hi = x0, x0 + (x1 - x0) * v0 / (v0 - v1)
        elif v1 >= 0:
            lo, hi = x1 - (x1 - x0) * v1 / (v1 - v0), x1
        else:
            continue
        if spans and abs(spans[-1][1] - lo) <= 1e-12 * max(1.0, B):
            spans[-1][1] = hi
        else:
            spans.append([lo, hi])
    return [Hypercube([lo], [hi]) for lo, hi in spans if hi - lo > 1e-12 * B]


def _positive_simplices_2d(net, B, samples, seed):
    cutoff = 1e-10 * (2 * B) ** 2
    out = []
    for poly, a, b in enumerate_regions_2d(net, B, samples=samples, seed=seed):
        pos = clip_halfplane(poly, a, b)
        if len(pos) < 3 or polygon_area(pos) < cutoff:
            continue
        out.extend(p.simplex for p in triangulate(pos, np.zeros(2), 0.0))
    return out


def _positive_simplices_cover(cover):
    out = []
    for i, piece in enumerate(cover.pieces):
        vals = piece.simplex.vertices @ piece.a + piece.b
        if np.all(vals >= 0):
            out.append(piece.simplex)
        elif np.any(vals > 0):
            raise InputError(f"cover piece {i} straddles the decision boundary")
    return out


def classify_transform(net, mode, delta, B, mu=None, cover=None, samples=100_000, seed=0):
    """Binary-step network reproducing the labels ``z(net(x))`` on [-B, B]^D.

    The label-1 region is extracted (exactly in 1D, by region enumeration
    and half-plane clipping in 2D, or from a sign-constant ``cover``),
    split into simplices and handed to :func:`build_step_wide` or
    :func:`build_step_deep`.
    """
    if mode not in ("wide", "deep"):
        raise InputError(f"mode must be 'wide' or 'deep', got {mode!r}")
    if not delta > 0:
        raise InputError("delta must be positive")
    if not B > 0:
        raise InputError("B must be positive")
    D = cover.dim if cover is not None else net.input_dim
    if cover is not None:
        if not isinstance(cover, SimplicialCover):
            raise InputError("cover must be a SimplicialCover")
        simplices = _positive_simplices_cover(cover)
    elif D == 1:
        simplices = [_as_simplex(c) for c in _positive_intervals(net, B)]
    elif D == 2:
        simplices = _positive_simplices_2d(net, B, samples, seed)
    else:
        raise UnsupportedNetworkError(
            "region extraction covers D <= 2; pass a SimplicialCover for D > 2"
        )
    K = len(simplices)
    report = {"mode": mode, "task": "classification", "D": D, "M": K,
              "delta": float(delta), "mu": None, "budget": 0.0}
    if K == 0:
        out = constant_network(D)
    elif mode == "wide":
        out = build_step_wide(simplices)
    else:
        if mu is None:
            mu = step_deep_mu(delta, D, B, K)
        report["mu"] = float(mu)
        report["budget"] = K * box_constant(D, B) / (float(mu) - 1.0)
        out = build_step_deep(simplices, mu)
    report["metrics"] = asdict(structure_metrics(out))
    rules = RuleSystem(tuple(simplices), D)
    return ClassifyResult(out, rules, report)


__all__ = [
    "ArchitecturePlan",
    "ClassifyResult",
    "RuleSystem",
    "build_demorgan_deep",
    "build_demorgan_wide",
    "build_mixed",
    "build_step_deep",
    "build_step_wide",
    "classify_transform",
    "ramp_width",
    "step_deep_mu",
]
