"""Shipped example networks and seeded generators used by tests and demos."""

from __future__ import annotations

import math

import numpy as np

from netmorph.geometry import Hypercube, LinearPiece, Simplex, template_simplex
from netmorph.netcore import Activation, NetworkBuilder

# 2-6-2-1 classifier with a curved, non-convex decision boundary in
# [-3, 3]^2 (label = output >= 0).  Weights are fixed to two decimals.
_W1 = [[0.84, 1.12], [0.13, 0.19], [-3.66, -0.46], [3.65, -0.64], [-2.89, -2.8], [-0.02, 0.12]]
_B1 = [2.25, -0.58, -2.88, -2.45, 1.76, -0.75]
_W2 = [[-1.25, 0.76, -3.96, 2.56, 2.2, -0.68], [1.85, -0.36, 3.34, -1.08, -1.55, -0.16]]
_B2 = [0.68, 1.48]
_W3 = [-2.82, 2.62]
_B3 = -1.29


def net_2621():
    """Two ReLU hidden layers (6 and 2) and an identity output neuron."""
    nb = NetworkBuilder(2)
    h = [nb.add([("x0", w[0]), ("x1", w[1])], b) for w, b in zip(_W1, _B1)]
    g = [nb.add([(h[j], w[j]) for j in range(6)], b) for w, b in zip(_W2, _B2)]
    out = nb.add([(g[0], _W3[0]), (g[1], _W3[1])], _B3, Activation.IDENTITY)
    return nb.build([(out, 1.0)])


def net_pwl5():
    """Univariate ReLU net with five linear pieces on [-2, 2]."""
    nb = NetworkBuilder(1)
    terms = []
    for w, b, c in ((1.0, 1.5, 1.0), (1.0, 1.0, -2.0), (1.0, 0.0, 1.5), (1.0, -1.0, -1.25)):
        terms.append((nb.add([("x0", w)], b), c))
    return nb.build(terms, 0.25)


def template_piece(D, a=None, b=0.0):
    a = np.zeros(D) if a is None else a
    return LinearPiece(template_simplex(D), a, b)


def _min_angle(tri):
    angles = []
    for i in range(3):
        u = tri[(i + 1) % 3] - tri[i]
        v = tri[(i + 2) % 3] - tri[i]
        cos = u @ v / (np.linalg.norm(u) * np.linalg.norm(v))
        angles.append(math.degrees(math.acos(np.clip(cos, -1, 1))))
    return min(angles)


def random_triangle(rng, B, min_angle=20.0, size=(0.3, 1.0)):
    """Triangle inside [-B, B]^2 with every angle >= ``min_angle`` degrees."""
    while True:
        radius = rng.uniform(*size) * B / 2
        centre = rng.uniform(-B + radius, B - radius, 2)
        theta = np.sort(rng.uniform(0, 2 * math.pi, 3))
        tri = centre + radius * np.c_[np.cos(theta), np.sin(theta)]
        if _min_angle(tri) >= min_angle:
            return Simplex(tri)


def random_piece_2d(rng, B):
    tri = random_triangle(rng, B)
    return LinearPiece(tri, rng.normal(size=2), rng.normal())


def random_simplex_rules(rng, D, K, lo=0.0, hi=1.0):
    """K interior-disjoint simplices: one per distinct cell of a grid on
    [lo, hi]^D, each well inside its cell."""
    cells_per_axis = max(2, math.ceil(K ** (1 / D)))
    cells = rng.choice(cells_per_axis**D, size=K, replace=False)
    side = (hi - lo) / cells_per_axis
    rules = []
    for c in cells:
        idx = np.array(np.unravel_index(c, (cells_per_axis,) * D))
        corner = lo + idx * side
        while True:
            pts = corner + side * rng.uniform(0.05, 0.95, (D + 1, D))
            edges = pts[1:] - pts[0]
            # reject flat simplices so boundary-clearance sampling stays cheap
            if abs(np.linalg.det(edges)) > 0.05 * side**D:
                rules.append(Simplex(pts))
                break
    return rules


def random_interval_rules(rng, n, gap, lo=0.0, hi=1.0):
    """n disjoint 1D hypercubes with pairwise gaps (and margins) >= gap."""
    free = (hi - lo) - (n + 1) * gap
    if free <= 0:
        raise ValueError("gap too large for the requested rule count")
    cuts = np.sort(rng.uniform(0, free, 2 * n))
    rules = []
    for i in range(n):
        a = lo + (i + 1) * gap + cuts[2 * i]
        b = lo + (i + 1) * gap + cuts[2 * i + 1]
        if b - a < 1e-6:
            b = a + 1e-6
        rules.append(Hypercube([a], [b]))
    return rules
