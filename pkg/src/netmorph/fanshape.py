"""Fan-shaped ReLU building blocks.

With affine functionals h_1..h_D and a large factor mu,

    F_1 = h_1,   F_{j+1} = relu(F_j - mu^j relu(h_{j+1}))

equals h_1 on the fan h_1^+ ∩ h_2^- ∩ ... ∩ h_D^- and vanishes outside it,
except on thin slack wedges along the hyperplanes h_k = 0 whose measure
shrinks like 1/mu.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from netmorph.errors import InputError
from netmorph.netcore import Activation, NetworkBuilder

MU_POWER_CAP = 1e12
DEFAULT_MU = 1e4


@dataclass(frozen=True, eq=False)
class FanSpec:
    """``P[k] . x + r[k]`` is h_{k+1}; ``mu`` is the gating factor."""

    P: np.ndarray
    r: np.ndarray
    mu: float = DEFAULT_MU

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        r = np.asarray(self.r, dtype=float).reshape(-1)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "mu", float(self.mu))
        if P.shape[0] != P.shape[1] or r.size != P.shape[0]:
            raise InputError("need D functionals on R^D")
        if P.shape[0] < 2:
            raise InputError("a fan needs D >= 2")
        if np.linalg.svd(P, compute_uv=False).min() <= 1e-10:
            raise InputError("fan functionals must be linearly independent")
        if not self.mu >= 2:
            raise InputError("mu must be at least 2")

    @classmethod
    def from_functionals(cls, h_list, mu=DEFAULT_MU):
        """``h_list`` is a list of ``(p, r)`` pairs."""
        return cls([p for p, _ in h_list], [r for _, r in h_list], mu)

    @property
    def dim(self):
        return self.P.shape[0]

    def h(self, x):
        return np.atleast_2d(x) @ self.P.T + self.r

    def ideal(self, x):
        """Limit function: h_1 on the fan, 0 elsewhere."""
        vals = self.h(x)
        on_fan = (vals[:, 0] >= 0) & np.all(vals[:, 1:] < 0, axis=1)
        return np.where(on_fan, vals[:, 0], 0.0)


def mu_power(mu, j):
    """mu**j, capped at MU_POWER_CAP with a warning."""
    val = mu**j
    if val > MU_POWER_CAP:
        warnings.warn(f"mu^{j} = {val:.3g} capped at {MU_POWER_CAP:g}", RuntimeWarning)
        return MU_POWER_CAP
    return val


def _affine_edges(builder, p, level):
    return [(builder.input(k, level), float(c)) for k, c in enumerate(p) if c != 0.0]


def add_fan(builder, P, r, mu, level=0, extra=None):
    """Add a fan chain to ``builder``; returns the id of F_D.

    ``P``/``r`` rows are the functionals in input coordinates.  ``extra``
    is an optional list of ``(source, weight)`` added into h_1.
    """
    d = len(P)
    first = _affine_edges(builder, P[0], level) + list(extra or [])
    gates = [
        builder.add(_affine_edges(builder, P[k], level) or [(builder.input(0, level), 0.0)], r[k])
        for k in range(1, d)
    ]
    prev_edges, prev_bias = first, float(r[0])
    out = None
    for j, gate in enumerate(gates, start=1):
        out = builder.add(prev_edges + [(gate, -mu_power(mu, j))], prev_bias)
        prev_edges, prev_bias = [(out, 1.0)], 0.0
    return out


def build_fan_nd(spec):
    """Fan network F_D: width D, depth D."""
    builder = NetworkBuilder(spec.dim)
    out = add_fan(builder, spec.P, spec.r, spec.mu)
    return builder.build([(out, 1.0)])


def build_fan_2d(spec):
    """F(x) = relu(h_1(x) - mu relu(h_2(x))): width 2, depth 2."""
    if spec.dim != 2:
        raise InputError("build_fan_2d needs a 2D spec")
    return build_fan_nd(spec)


def box_constant(D, B):
    """Over-estimate of the largest hyperplane section of [-B, B]^D."""
    return (2 * B) ** (D - 1) * math.sqrt(D)


def slack_measure_bound(spec, B, C=None):
    """Analytic bound on the measure where F differs from its limit.

    In 2D this is 2*sqrt(2)*B/mu; in general C * sum_{j<D} mu^{-j}
    (at most C/(mu-1)) with C from :func:`box_constant` unless given.
    """
    D = spec.dim
    if C is None:
        C = box_constant(D, B)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return C * sum(1.0 / mu_power(spec.mu, j) for j in range(1, D))
