"""Univariate piecewise-linear functions and their exact ReLU realizations.

A continuous PWL function on [-B, B] is stored by its breakpoints
``x_0 = -B < x_1 < ... < x_{n+1} = B``, the slopes ``w^(0..n)`` of its
``n+1`` pieces and the anchor value ``f(x_0)``.  Two constructions realize
it exactly: a wide one (one hidden layer of width ``n+1``) and a deep one
(a one-neuron-wide chain of depth ``n+2``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from netmorph.errors import (
    DegeneratePieceError,
    InputError,
    NetworkParseError,
    UnsupportedNetworkError,
)
from netmorph.netcore import Activation, NetworkBuilder

MERGE_TOL = 1e-9
# knots closer than this (relative to B) are treated as one
_KNOT_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class PwlFunction1D:
    B: float
    breakpoints: np.ndarray
    slopes: np.ndarray
    anchor: float

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        w = np.asarray(self.slopes, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", w)
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "anchor", float(self.anchor))
        if not self.B > 0:
            raise InputError("B must be positive")
        if bp.ndim != 1 or bp.size < 2 or w.size != bp.size - 1:
            raise InputError("need n+2 breakpoints and n+1 slopes")
        if bp[0] != -self.B or bp[-1] != self.B:
            raise InputError("breakpoints must start at -B and end at B")
        if not np.all(np.diff(bp) > 0):
            raise InputError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.anchor)):
            raise InputError("slopes and anchor must be finite")
        if np.any(np.abs(np.diff(w)) <= MERGE_TOL):
            raise DegeneratePieceError("adjacent slopes coincide; merge the pieces")

    @property
    def n(self):
        """Number of interior breakpoints (the function has n+1 pieces)."""
        return self.slopes.size - 1

    @property
    def knot_values(self):
        """f at every breakpoint."""
        return self.anchor + np.concatenate([[0.0], np.cumsum(self.slopes * np.diff(self.breakpoints))])

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.knot_values)

    def __eq__(self, other):
        if not isinstance(other, PwlFunction1D):
            return NotImplemented
        return (
            self.B == other.B
            and self.anchor == other.anchor
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.slopes, other.slopes)
        )

    __hash__ = object.__hash__

    @classmethod
    def from_knots(cls, knots, values, tol=MERGE_TOL):
        """Build from sampled knots, fusing neighbouring pieces of equal slope."""
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.diff(values) / np.diff(knots)
        keep = [0]
        kept_slopes = [slopes[0]]
        for i in range(1, slopes.size):
            if abs(slopes[i] - kept_slopes[-1]) > tol:
                keep.append(i)
                kept_slopes.append(slopes[i])
        bp = np.append(knots[keep], knots[-1])
        # recompute slopes over the fused spans so values stay consistent
        vals = np.append(values[keep], values[-1])
        fused = np.diff(vals) / np.diff(bp)
        return cls(knots[-1], bp, fused, values[0])

    def to_document(self):
        return {
            "B": self.B,
            "breakpoints": self.breakpoints.tolist(),
            "slopes": self.slopes.tolist(),
            "anchor": self.anchor,
        }

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict):
            raise NetworkParseError("expected an object")
        for key in ("B", "breakpoints", "slopes", "anchor"):
            if key not in doc:
                raise NetworkParseError(f"missing key {key!r}")
        try:
            return cls(doc["B"], doc["breakpoints"], doc["slopes"], doc["anchor"])
        except (TypeError, ValueError) as exc:
            raise NetworkParseError(str(exc)) from exc


def extract_pwl(net, B):
    """Exact PWL form of a univariate ReLU network on [-B, B].

    Every node is tracked by its values on a shared, growing knot set; a
    ReLU whose pre-activation changes sign between two knots adds the
    crossing as a new knot.  Between knots every node is affine, so
    interpolating earlier nodes at new knots is exact.
    """
    if not B > 0:
        raise InputError("B must be positive")
    if net.input_dim != 1:
        raise UnsupportedNetworkError("extract_pwl needs a univariate network")
    B = float(B)
    knots = np.array([-B, B])
    vals = {"x0": knots.copy()}
    for neuron in net.neurons:
        if neuron.activation is Activation.STEP:
            raise UnsupportedNetworkError("binary-step neurons are not piecewise linear")
        pre = np.full(knots.size, neuron.bias)
        for src, w in neuron.incoming:
            pre = pre + w * vals[src]
        if neuron.activation is Activation.RELU:
            s = np.sign(pre)
            cross = np.nonzero(s[:-1] * s[1:] < 0)[0]
            if cross.size:
                t = pre[cross] / (pre[cross] - pre[cross + 1])
                new = knots[cross] + t * (knots[cross + 1] - knots[cross])
                merged = np.union1d(knots, new)
                keep = np.concatenate([[True], np.diff(merged) > _KNOT_TOL * B])
                merged = merged[keep]
                vals = {k: np.interp(merged, knots, v) for k, v in vals.items()}
                pre = np.interp(merged, knots, pre)
                knots = merged
                # exact zeros at the crossings, not interpolation noise
                pre[np.isin(knots, new)] = 0.0
            pre = np.maximum(pre, 0.0)
        vals[neuron.id] = pre
    out = np.full(knots.size, net.output_bias)
    for nid, w in net.output_terms:
        out = out + w * vals[nid]
    return PwlFunction1D.from_knots(knots, out)


def build_wide(f):
    """H1(x) = f(x_0) + sum_i (w_i - w_{i-1}) relu(x - x_i), width n+1, depth 2."""
    builder = NetworkBuilder(1)
    deltas = np.diff(np.concatenate([[0.0], f.slopes]))
    terms = []
    for xi, d in zip(f.breakpoints[:-1], deltas):
        nid = builder.add([(builder.input(0), 1.0)], -xi)
        terms.append((nid, d))
    return builder.build(terms, f.anchor)


def build_deep(f):
    """One-neuron-wide chain realizing f, depth n+2.

    R_0 = relu(|d_0| (x - x_0)) and
    R_{i+1} = relu(|d_{i+1}| (R_i / |d_i| - x_{i+1} + x_i)),
    so that R_i = |d_i| relu(x - x_i) and f = f(x_0) + sum sgn(d_i) R_i.
    """
    deltas = np.diff(np.concatenate([[0.0], f.slopes]))
    if np.any(np.abs(deltas[1:]) <= MERGE_TOL):
        raise DegeneratePieceError("slope change below tolerance; merge first")
    # a (nearly) flat first piece: carry x - x_0 with unit scale and put
    # d_0 itself on the readout
    scales = np.abs(deltas)
    signs = np.sign(deltas)
    if scales[0] <= MERGE_TOL:
        scales[0] = 1.0
        signs[0] = deltas[0]
    builder = NetworkBuilder(1)
    bp = f.breakpoints
    prev = builder.add([(builder.input(0), scales[0])], -scales[0] * bp[0])
    terms = [(prev, signs[0])]
    for i in range(1, f.slopes.size):
        nid = builder.add(
            [(prev, scales[i] / scales[i - 1])], scales[i] * (bp[i - 1] - bp[i])
        )
        terms.append((nid, signs[i]))
        prev = nid
    return builder.build(terms, f.anchor)


def random_pwl(rng, n_pieces, B, min_gap=None, min_jump=0.1):
    """Seeded random PWL with ``n_pieces`` pieces on [-B, B]."""
    n_pieces = int(n_pieces)
    if n_pieces < 1:
        raise InputError("need at least one piece")
    B = float(B)
    gap = min_gap if min_gap is not None else 2 * B / (4 * n_pieces)
    if gap * n_pieces >= 2 * B:
        raise InputError("min_gap too large for the requested piece count")
    # spacings = fixed floor + a random share of the remaining length
    share = rng.dirichlet(np.ones(n_pieces))
    widths = gap + share * (2 * B - gap * n_pieces)
    bp = np.concatenate([[-B], -B + np.cumsum(widths)[:-1], [B]])
    jumps = rng.uniform(min_jump, 2.0, n_pieces) * rng.choice([-1.0, 1.0], n_pieces)
    slopes = rng.normal() + np.concatenate([[0.0], np.cumsum(jumps[1:])])
    return PwlFunction1D(B, bp, slopes, rng.normal())
