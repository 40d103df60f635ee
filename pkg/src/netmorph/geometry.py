"""Simplices, the template-simplex normalization and 2D region enumeration.

The template simplex is ``{t >= 0, sum(t) <= 1}``.  Its facets are the zero
sets of ``l_i(t) = t_i`` (i < D) and ``l_D(t) = 1 - sum(t)``; a simplex S is
mapped onto it by ``T(x) = V^{-1} (x - v_0)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from netmorph.errors import (
    DegenerateSimplexError,
    InputError,
    NetworkParseError,
    UnsupportedNetworkError,
)
from netmorph.netcore import Activation, preactivations

log = logging.getLogger(__name__)

DET_TOL = 1e-10
AREA_CUTOFF = 1e-8


@dataclass(frozen=True, eq=False)
class AffineMap:
    """x -> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.matrix.T + self.offset

    def inverse(self):
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.offset)


@dataclass(frozen=True, eq=False)
class Simplex:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1] + 1:
            raise InputError("a D-simplex needs D+1 vertices in R^D")
        if not np.all(np.isfinite(v)):
            raise InputError("vertices must be finite")
        if abs(np.linalg.det(self.edge_matrix)) <= DET_TOL:
            raise DegenerateSimplexError("vertices are affinely dependent")

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def edge_matrix(self):
        """V = (v_1 - v_0, ..., v_D - v_0) as columns."""
        return (self.vertices[1:] - self.vertices[0]).T

    @property
    def volume(self):
        return abs(np.linalg.det(self.edge_matrix)) / _factorial(self.dim)

    def facets(self):
        """Facet functionals in x-space: rows ``(g, h)`` with l_i(T x) = g.x + h.

        All are non-negative exactly on the simplex.
        """
        T = normalize(self)
        G = np.vstack([T.matrix, -T.matrix.sum(axis=0)])
        h = np.append(T.offset, 1.0 - T.offset.sum())
        return G, h

    def facet_distances(self, x):
        """Signed distances from points to each facet hyperplane, shape (n, D+1).

        Positive on the simplex side; all positive means inside.
        """
        G, h = self.facets()
        return (np.atleast_2d(x) @ G.T + h) / np.linalg.norm(G, axis=1)

    def contains(self, x, tol=0.0):
        G, h = self.facets()
        return np.all(np.atleast_2d(x) @ G.T + h >= -tol, axis=1)

    def sample(self, rng, n):
        """Uniform points in the simplex."""
        w = rng.dirichlet(np.ones(self.dim + 1), size=n)
        return w @ self.vertices


def _factorial(d):
    out = 1
    for k in range(2, d + 1):
        out *= k
    return out


def template_simplex(d):
    return Simplex(np.vstack([np.zeros(d), np.eye(d)]))


def normalize(s):
    """Affine map T with T(v_0) = 0 and T(v_i) = e_i."""
    V = s.edge_matrix
    if abs(np.linalg.det(V)) <= DET_TOL:
        raise DegenerateSimplexError("vertices are affinely dependent")
    inv = np.linalg.inv(V)
    return AffineMap(inv, -inv @ s.vertices[0])


@dataclass(frozen=True, eq=False)
class LinearPiece:
    """f(x) = a.x + b on ``simplex`` and 0 elsewhere."""

    simplex: Simplex
    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))
        if a.size != self.simplex.dim:
            raise InputError("gradient length must equal the simplex dimension")
        if not (np.all(np.isfinite(a)) and np.isfinite(self.b)):
            raise InputError("piece payload must be finite")

    def template_payload(self):
        """(a', b') with a.x + b = a'.t + b' for t = T(x)."""
        V = self.simplex.edge_matrix
        v0 = self.simplex.vertices[0]
        return V.T @ self.a, float(self.a @ v0 + self.b)

    def __call__(self, x):
        x = np.atleast_2d(x)
        return np.where(self.simplex.contains(x), x @ self.a + self.b, 0.0)


@dataclass(frozen=True)
class Hypercube:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or not lo:
            raise InputError("lo and hi must have the same positive length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise InputError("need lo < hi componentwise")

    @property
    def dim(self):
        return len(self.lo)

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=1)


@dataclass(frozen=True)
class SimplicialCover:
    pieces: tuple

    @property
    def M(self):
        return len(self.pieces)

    @property
    def dim(self):
        return self.pieces[0].simplex.dim if self.pieces else None

    def to_document(self):
        return {
            "D": self.dim,
            "pieces": [
                {
                    "vertices": p.simplex.vertices.tolist(),
                    "a": p.a.tolist(),
                    "b": p.b,
                }
                for p in self.pieces
            ],
        }

    @classmethod
    def from_document(cls, doc):
        if not isinstance(doc, dict) or "pieces" not in doc or "D" not in doc:
            raise NetworkParseError("expected an object with 'D' and 'pieces'")
        dim = doc["D"]
        pieces = []
        for i, raw in enumerate(doc["pieces"]):
            where = f"pieces/{i}"
            try:
                simplex = Simplex(raw["vertices"])
                if simplex.dim != dim:
                    raise InputError(f"simplex dimension {simplex.dim} != D={dim}")
                pieces.append(LinearPiece(simplex, raw["a"], raw["b"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise NetworkParseError(str(exc), where) from exc
        return cls(tuple(pieces))


# ------------------------------------------------------------------ polygons


def polygon_area(poly):
    """Shoelace area of a polygon given as an (n, 2) vertex array."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_halfplane(poly, g, h):
    """Sutherland-Hodgman step: keep the part of ``poly`` where g.x + h >= 0."""
    out = []
    n = len(poly)
    if n == 0:
        return poly
    vals = poly @ g + h
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp >= 0:
            out.append(p)
        if (vp >= 0) != (vq >= 0):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def _clean(poly, scale):
    """Drop repeated and collinear vertices."""
    tol = 1e-12 * scale
    pts = []
    for p in poly:
        if not pts or np.linalg.norm(p - pts[-1]) > tol:
            pts.append(p)
    if len(pts) > 1 and np.linalg.norm(pts[0] - pts[-1]) <= tol:
        pts.pop()
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if abs(cross) <= tol * scale:
                pts.pop(i)
                changed = True
                break
    return np.array(pts).reshape(-1, 2)


def enumerate_regions_2d(net, B, samples=100_000, rng=None, seed=0):
    """Linear regions of a 2D ReLU network inside [-B, B]^2.

    Activation patterns are collected from seeded uniform samples; each
    distinct pattern is realized as a convex polygon by clipping the square
    with the pattern's half-planes, and its affine payload ``(a, b)`` comes
    from propagating the fixed pattern symbolically.  Returns a list of
    ``(polygon, a, b)``.
    """
    if net.input_dim != 2:
        raise UnsupportedNetworkError("region enumeration is implemented for D=2 only")
    if not B > 0:
        raise InputError("B must be positive")
    if any(n.activation is Activation.STEP for n in net.neurons):
        raise UnsupportedNetworkError("binary-step neurons are not supported")
    rng = rng if rng is not None else np.random.default_rng(seed)
    B = float(B)
    pts = rng.uniform(-B, B, size=(int(samples), 2))
    relu_cols = np.array(
        [i for i, n in enumerate(net.neurons) if n.activation is Activation.RELU], dtype=int
    )
    pre = preactivations(net, pts)[:, relu_cols]
    patterns = np.unique(pre >= 0, axis=0)
    square = np.array([[-B, -B], [B, -B], [B, B], [-B, B]])
    cutoff = AREA_CUTOFF * (2 * B) ** 2
    regions = []
    for pattern in patterns:
        poly, a, b = _realize_pattern(net, relu_cols, pattern, square)
        poly = _clean(poly, B) if len(poly) else poly
        area = polygon_area(poly)
        if len(poly) < 3 or area < cutoff:
            log.info("dropping region with area %.3g", area)
            continue
        regions.append((poly, a, b))
    return regions


def _realize_pattern(net, relu_cols, pattern, square):
    active = dict(zip(relu_cols.tolist(), pattern.tolist()))
    aff = {"x0": (np.array([1.0, 0.0]), 0.0), "x1": (np.array([0.0, 1.0]), 0.0)}
    poly = square.astype(float)
    for i, neuron in enumerate(net.neurons):
        g = np.zeros(2)
        h = neuron.bias
        for src, w in neuron.incoming:
            sg, sh = aff[src]
            g = g + w * sg
            h = h + w * sh
        if neuron.activation is Activation.RELU:
            if active[i]:
                poly = clip_halfplane(poly, g, h)
            else:
                poly = clip_halfplane(poly, -g, -h)
                g, h = np.zeros(2), 0.0
        aff[neuron.id] = (g, h)
        if len(poly) < 3:
            return poly, None, None
    a = np.zeros(2)
    b = net.output_bias
    for nid, w in net.output_terms:
        a = a + w * aff[nid][0]
        b = b + w * aff[nid][1]
    return poly, a, float(b)


def triangulate(polygon, a, b):
    """Fan triangulation of a convex polygon from its vertex centroid."""
    poly = np.asarray(polygon, dtype=float)
    if len(poly) < 3:
        log.info("polygon with %d vertices yields no triangles", len(poly))
        return []
    if len(poly) == 3:
        return [LinearPiece(Simplex(poly), a, b)]
    c = poly.mean(axis=0)
    pieces = []
    for i in range(len(poly)):
        tri = np.array([c, poly[i], poly[(i + 1) % len(poly)]])
        try:
            pieces.append(LinearPiece(Simplex(tri), a, b))
        except DegenerateSimplexError:
            log.info("skipping degenerate fan triangle")
    return pieces


def cover_from_network_2d(net, B, samples=100_000, seed=0, skip_zero=True):
    """Triangulated regions of a 2D network as a :class:`SimplicialCover`.

    Pieces whose payload is identically zero are skipped when ``skip_zero``.
    """
    pieces = []
    for poly, a, b in enumerate_regions_2d(net, B, samples=samples, seed=seed):
        if skip_zero and b == 0.0 and not np.any(a):
            continue
        pieces.extend(triangulate(poly, a, b))
    return SimplicialCover(tuple(pieces))
