"""Wide and deep per-simplex networks and the regression transform.

Every per-piece construction is carried out on the template simplex
``{t >= 0, sum(t) <= 1}`` and pulled back to input coordinates by folding
``t = T(x)`` into the first-layer weights.  In template coordinates the
facets are ``l_i(t) = t_i`` for ``i < D`` and ``l_D(t) = 1 - sum(t)``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import networkx as nx
import numpy as np

from netmorph.errors import (
    InfeasibleParametersError,
    InputError,
    UnsupportedNetworkError,
)
from netmorph.fanshape import MU_POWER_CAP, add_fan, box_constant
from netmorph.geometry import SimplicialCover, cover_from_network_2d, normalize
from netmorph.netcore import (
    NetworkBuilder,
    compose_stack,
    compose_sum,
    constant_network,
    structure_metrics,
)
from netmorph import pwl1d

log = logging.getLogger(__name__)

MAX_DIM = 8
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class TransformParams:
    mu: float
    eta: float
    nu: float
    tau: float
    delta: float
    B: float


@dataclass(frozen=True, eq=False)
class BasisSolve:
    matrix: np.ndarray
    rhs: np.ndarray
    solution: np.ndarray
    residual: float


def solve_basis(matrix, rhs, square_rows=None):
    """Solve ``matrix @ w = rhs``; the residual covers every row.

    With ``square_rows`` the solve uses only those rows (the rest are
    consistency checks).
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    rows = slice(None) if square_rows is None else square_rows
    sol = np.linalg.solve(matrix[rows], rhs[rows])
    residual = float(np.linalg.norm(matrix @ sol - rhs))
    scale = max(float(np.linalg.norm(rhs)), 1.0)
    if residual >= RESIDUAL_TOL * scale:
        raise ArithmeticError(f"basis solve residual {residual:.3g} too large")
    return BasisSolve(matrix, rhs, sol, residual)


def exact_solve(matrix, rhs):
    """Solve a small square system exactly over the rationals.

    Float entries are converted without rounding, so the result is the
    float nearest to the true solution of the system *as stored*.
    """
    A = [[Fraction(float(v)) for v in row] + [Fraction(float(r))]
         for row, r in zip(np.asarray(matrix), np.asarray(rhs))]
    n = len(A)
    for c in range(n):
        pivot = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[pivot] = A[pivot], A[c]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c] / A[c][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return np.array([float(A[r][n] / A[r][r]) for r in range(n)])


# ------------------------------------------------------------- parameters


def _check_dim(D):
    if not isinstance(D, (int, np.integer)) or D < 1:
        raise InputError("D must be a positive integer")
    if D > MAX_DIM:
        raise UnsupportedNetworkError(f"D={D} exceeds the supported maximum {MAX_DIM}")


def n_wide_domains(D):
    return len(wide_domains(D))


def param_bound(task, D, B):
    """Return k such that the strict parameter bound is ``delta / k``."""
    if task not in ("wide", "deep"):
        raise InputError(f"unknown task {task!r}")
    if D == 2:
        return (30 if task == "wide" else 22) * math.sqrt(2) * B
    C = box_constant(D, B)
    if task == "wide":
        return n_wide_domains(D) * C * (2 * D + 1)
    return C * (2 * D * D + 3 * D)


def choose_params(task, D, B, delta):
    """Parameters at half of the applicable strict bound.

    ``eta = nu = tau`` and ``1/mu`` (``1/(mu-1)`` for D >= 3) all equal
    half the bound.  D=1 needs no parameters: the univariate transform is
    exact, so ``mu`` is infinite and the rest are zero.
    """
    _check_dim(D)
    if not B > 0:
        raise InputError("B must be positive")
    if not delta > 0:
        raise InputError("delta must be positive")
    if D == 1:
        return TransformParams(math.inf, 0.0, 0.0, 0.0, float(delta), float(B))
    value = delta / param_bound(task, D, B) / 2
    mu = 1 / value if D == 2 else 1 + 1 / value
    if mu > MU_POWER_CAP:
        min_delta = delta * mu / MU_POWER_CAP
        raise InfeasibleParametersError(
            f"delta={delta:g} needs mu={mu:.3g} above the cap {MU_POWER_CAP:g}; "
            f"smallest feasible delta is about {min_delta:.3g}",
            min_delta=min_delta,
        )
    return TransformParams(mu, value, value, value, float(delta), float(B))


def params_from_mu(mu, task, D, B):
    """Explicit mu with eta = nu = tau = 1/mu; delta is the implied budget."""
    _check_dim(D)
    mu = float(mu)
    if not mu >= 2:
        raise InputError("mu must be at least 2")
    small = 1 / mu
    proto = TransformParams(mu, small, small, small, 0.0, float(B))
    return TransformParams(mu, small, small, small, piece_budget(task, D, proto), float(B))


def piece_budget(task, D, params):
    """Per-simplex mismatch bound for these parameters."""
    B, mu, eta, nu, tau = params.B, params.mu, params.eta, params.nu, params.tau
    if D == 1:
        return 0.0
    if D == 2:
        k = 2 * math.sqrt(2) * B
        if task == "wide":
            return k * (6 * eta + 9 / mu)
        return k * (3 * nu + 2 * tau + 6 / mu)
    C = box_constant(D, B)
    if task == "wide":
        return n_wide_domains(D) * C * (D * eta + (D + 1) / (mu - 1))
    return C * D * (D + 1) / (mu - 1) + C * (D + 1) * (D - 1) * nu + C * D * tau


# ----------------------------------------------------- template functionals


def _facet(i, D):
    """Coefficients (q, s) of facet functional l_i in template coordinates."""
    if i < D:
        q = np.zeros(D)
        q[i] = 1.0
        return q, 0.0
    return -np.ones(D), 1.0


class _Frame:
    """Pull-back of template-coordinate functionals to input coordinates."""

    def __init__(self, simplex):
        self.T = normalize(simplex)
        self.D = simplex.dim

    def pull(self, q, s):
        q = np.asarray(q, dtype=float)
        return self.T.matrix.T @ q, float(q @ self.T.offset + s)

    def rows(self, funcs):
        pulled = [self.pull(q, s) for q, s in funcs]
        return np.array([p for p, _ in pulled]), np.array([r for _, r in pulled])


def _affine_incoming(builder, p, level=0):
    edges = [(builder.input(k, level), float(c)) for k, c in enumerate(p) if c != 0.0]
    return edges or [(builder.input(0, level), 0.0)]


# ----------------------------------------------------------------- domains


_DOMAINS_2D = (
    # A(v,-,+), A(+,v,-), A(-,+,v): fixed signs of (l_0, l_1, l_2), None = free
    (None, "-", "+"),
    ("+", None, "-"),
    ("-", "+", None),
)


@lru_cache(maxsize=None)
def wide_domains(D):
    """Fan-shaped domains that tile the complement of the template simplex.

    Each domain fixes the sign of all facet functionals but one.  Sign
    vectors are vertices of the hypercube graph on D+1 coordinates, and a
    domain is an edge, so the domains are a perfect matching of every sign
    vector except all-'+' (the simplex itself) and all-'-' (empty).  For
    odd D that set has unequal colour classes and no perfect matching
    exists; there the empty all-'-' vector is used twice, giving 2^D
    domains instead of 2^D - 1.
    """
    _check_dim(D)
    if D == 2:
        return _DOMAINS_2D
    n = D + 1
    plus = tuple("+" * n)
    minus = tuple("-" * n)
    nodes = [v for v in itertools.product("+-", repeat=n) if v != plus]
    extra = []
    if D % 2 == 0:
        nodes.remove(minus)
    else:
        u = tuple("-" * D + "+")
        nodes.remove(u)
        extra.append((u, minus))
    nodes.sort()
    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    node_set = set(nodes)
    for v in nodes:
        for k in range(n):
            w = v[:k] + ("+" if v[k] == "-" else "-",) + v[k + 1 :]
            if w in node_set and v < w:
                graph.add_edge(v, w)
    top = [v for v in nodes if v.count("+") % 2 == 0]
    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=top)
    pairs = sorted((v, matching[v]) for v in top)
    if 2 * len(pairs) != len(nodes):
        raise AssertionError("sign-vector matching is not perfect")
    domains = []
    for v, w in pairs + extra:
        free = next(k for k in range(n) if v[k] != w[k])
        domains.append(tuple(None if k == free else v[k] for k in range(n)))
    return tuple(domains)


# ------------------------------------------------------------ wide piece N1


def _domain_fans(domain, D):
    """(s, j, gates) for a domain: h_1 = s*l_j, gate functionals as (q, s)."""
    fixed = [(k, sign) for k, sign in enumerate(domain) if sign is not None]
    lead = next(((k, sign) for k, sign in fixed if sign == "+"), fixed[0])
    j, sign = lead
    s = 1.0 if sign == "+" else -1.0
    gates = []
    for k, sg in fixed:
        if k == j:
            continue
        q, c = _facet(k, D)
        # a '+' constraint is enforced by killing l_k < 0, i.e. gating on -l_k
        gates.append((-q, -c) if sg == "+" else (q, c))
    return s, j, gates


def _perturbations(j, D):
    """Basis elements added to h_1 = +-l_j: every affine basis element except
    the one proportional to l_j (t_j for j < D, the constant for j = D)."""
    out = [k for k in range(D) if k != j]
    if j < D:
        out.append(D)  # index D stands for the constant function
    return out


def _add_wide_piece(builder, piece, params, solves=None, level=0):
    D = piece.simplex.dim
    frame = _Frame(piece.simplex)
    a_t, b_t = piece.template_payload()
    terms = []
    p_f = piece.a
    n_pos = builder.add(_affine_incoming(builder, p_f, level), piece.b)
    n_neg = builder.add(_affine_incoming(builder, -p_f, level), -piece.b)
    terms += [(n_pos, 1.0), (n_neg, -1.0)]
    rhs = -np.append(a_t, b_t)
    for domain in wide_domains(D):
        s, j, gates = _domain_fans(domain, D)
        q0, c0 = _facet(j, D)
        base = s * np.append(q0, c0)
        cols = [base]
        for k in _perturbations(j, D):
            col = base.copy()
            col[k] -= params.eta
            cols.append(col)
        solve = solve_basis(np.array(cols).T, rhs)
        if solves is not None:
            solves.append(solve)
        gate_P, gate_r = frame.rows(gates)
        pulled = [frame.pull(col[:D], col[D]) for col in cols]
        # the template solve fixes the system; the weights use the
        # same system re-solved exactly against the stored (rounded) h_1's
        stored = np.array([np.append(p1, r1) for p1, r1 in pulled]).T
        omega = exact_solve(stored, -np.append(piece.a, piece.b))
        for (p1, r1), w in zip(pulled, omega):
            P = np.vstack([p1, gate_P]) if gates else p1[None, :]
            r = np.append(r1, gate_r)
            out = add_fan(builder, P, r, params.mu, level=level) if gates else None
            if out is None:
                # D = 1 has no gates; the fan degenerates to relu(h_1)
                out = builder.add(_affine_incoming(builder, p1, level), r1)
            terms.append((out, float(w)))
    return terms


def build_wide_piece(piece, params, solves=None):
    """Wide per-simplex network N1: width D(D+1)K+2 and depth D+1, where
    K = len(wide_domains(D)) (2^D - 1 for even D, 2^D for odd D)."""
    if piece.simplex.dim < 2:
        raise InputError("per-simplex constructions need D >= 2")
    _check_dim(piece.simplex.dim)
    builder = NetworkBuilder(piece.simplex.dim)
    terms = _add_wide_piece(builder, piece, params, solves)
    return builder.build(terms, 0.0)


def build_wide_piece_2d(piece, params, solves=None):
    if piece.simplex.dim != 2:
        raise InputError("expected a 2D piece")
    return build_wide_piece(piece, params, solves)


build_wide_piece_nd = build_wide_piece


# ------------------------------------------------------------ deep piece N2


def _deep_targets(D, tau):
    """Coefficient vectors (alpha, beta) of l_D and its tilted copies
    l_D - tau t_l, l = 0..D-1."""
    base = np.append(-np.ones(D), 1.0)
    out = [base]
    for l in range(D):
        g = base.copy()
        g[l] -= tau
        out.append(g)
    return out


def _gamma_system(alpha, beta, nu, D):
    """Fans h^(0) = t_0 and h^(k) = t_0 - nu (t_k - c_k) with shifts c_k chosen
    so sum_k gamma_k h^(k) reproduces alpha.t + beta with no bias."""
    c = np.zeros(D)
    c[1:] = beta / (-alpha[1:] * (D - 1))
    cols = []
    for k in range(D):
        col = np.zeros(D + 1)
        col[0] = 1.0
        if k > 0:
            col[k] -= nu
            col[D] = nu * c[k]
        cols.append(col)
    return np.array(cols).T, c


def _add_deep_block(builder, frame, alpha, beta, params, solves, level):
    D = frame.D
    matrix, shifts = _gamma_system(alpha, beta, params.nu, D)
    solve = solve_basis(matrix, np.append(alpha, beta), square_rows=slice(0, D))
    if solves is not None:
        solves.append(solve)
    gates = [(-_facet(k, D)[0], 0.0) for k in range(1, D)]
    gate_P, gate_r = frame.rows(gates)
    edges = []
    realized = [Fraction(0)] * (D + 1)
    for k in range(D):
        col = matrix[:, k]
        p1, r1 = frame.pull(col[:D], col[D])
        P = np.vstack([p1, gate_P])
        r = np.append(r1, gate_r)
        fan = add_fan(builder, P, r, params.mu, level=level)
        g = float(solve.solution[k])
        edges.append((fan, g))
        for i, v in enumerate(np.append(p1, r1)):
            realized[i] += Fraction(g) * Fraction(float(v))
    # on the simplex every fan equals its h_1, so the block is exactly this
    # affine function of x (before rounding to float)
    return builder.add(edges, 0.0), [float(v) for v in realized]


def _add_deep_piece(builder, piece, params, solves=None, level=0):
    D = piece.simplex.dim
    frame = _Frame(piece.simplex)
    a_t, b_t = piece.template_payload()
    targets = _deep_targets(D, params.tau)
    rho = solve_basis(np.array(targets).T, np.append(a_t, b_t))
    if solves is not None:
        solves.append(rho)
    blocks, realized = [], []
    for g in targets:
        block, coef = _add_deep_block(builder, frame, g[:D], g[D], params, solves, level)
        blocks.append(block)
        realized.append(coef)
    # readout weights re-solved exactly against the blocks as stored
    weights = exact_solve(np.array(realized).T, np.append(piece.a, piece.b))
    return [(block, float(w)) for block, w in zip(blocks, weights)]


def build_deep_piece(piece, params, solves=None):
    """Deep per-simplex network N2: width D^2(D+1), depth D+2."""
    if piece.simplex.dim < 2:
        raise InputError("per-simplex constructions need D >= 2")
    _check_dim(piece.simplex.dim)
    builder = NetworkBuilder(piece.simplex.dim)
    terms = _add_deep_piece(builder, piece, params, solves)
    return builder.build(terms, 0.0)


def build_deep_piece_2d(piece, params, solves=None):
    if piece.simplex.dim != 2:
        raise InputError("expected a 2D piece")
    return build_deep_piece(piece, params, solves)


build_deep_piece_nd = build_deep_piece


# --------------------------------------------------------------- transform


@dataclass
class TransformResult:
    network: object
    report: dict = field(default_factory=dict)


def _metrics_dict(net):
    return asdict(structure_metrics(net))


def _transform_1d(net, mode, delta, B):
    f = pwl1d.extract_pwl(net, B)
    out = pwl1d.build_wide(f) if mode == "wide" else pwl1d.build_deep(f)
    grid = np.concatenate([np.linspace(-B, B, 10_001), f.breakpoints])[:, None]
    from netmorph.netcore import evaluate

    err = float(np.max(np.abs(evaluate(out, grid) - evaluate(net, grid))))
    report = {
        "mode": mode,
        "D": 1,
        "M": int(f.slopes.size),
        "exact": True,
        "max_abs_error": err,
        "delta": float(delta),
        "budget": 0.0,
        "params": None,
        "metrics": _metrics_dict(out),
    }
    return TransformResult(out, report)


def transform(net, mode, delta, B, mu=None, cover=None, samples=100_000, seed=0):
    """Quasi-equivalent wide (``mode='wide'``) or deep network of ``net``.

    D=1 is exact.  D=2 enumerates the linear regions; D>2 requires
    ``cover``.  The budget ``delta`` is split evenly over the M simplices.
    With ``mu`` given the parameters are taken from it instead
    (eta = nu = tau = 1/mu) and the implied budget is reported.
    """
    if mode not in ("wide", "deep"):
        raise InputError(f"mode must be 'wide' or 'deep', got {mode!r}")
    if not delta > 0:
        raise InputError("delta must be positive")
    if not B > 0:
        raise InputError("B must be positive")
    D = net.input_dim if net is not None else cover.dim
    if D == 1 and cover is None:
        return _transform_1d(net, mode, delta, B)
    if cover is None:
        if D != 2:
            raise UnsupportedNetworkError(
                "region enumeration covers D <= 2; pass a SimplicialCover for D > 2"
            )
        cover = cover_from_network_2d(net, B, samples=samples, seed=seed)
    if not isinstance(cover, SimplicialCover):
        raise InputError("cover must be a SimplicialCover")
    M = cover.M
    if M == 0:
        out = constant_network(D)
        return TransformResult(out, {"mode": mode, "D": D, "M": 0, "budget": 0.0,
                                     "delta": float(delta), "params": None,
                                     "metrics": _metrics_dict(out)})
    if mu is not None:
        params = params_from_mu(mu, mode, D, B)
        total = M * params.delta
        if total > delta:
            warnings.warn(
                f"mu={mu:g} implies a mismatch budget {total:.3g} above delta={delta:g}",
                RuntimeWarning,
            )
    else:
        try:
            params = choose_params(mode, D, B, delta / M)
        except InfeasibleParametersError as exc:
            min_delta = exc.min_delta * M
            raise InfeasibleParametersError(
                f"delta={delta:g} over M={M} pieces needs mu above the cap "
                f"{MU_POWER_CAP:g}; smallest feasible delta is about {min_delta:.3g}",
                min_delta=min_delta,
            ) from exc
    solves = []
    build = build_wide_piece if mode == "wide" else build_deep_piece
    nets = [build(piece, params, solves) for piece in cover.pieces]
    out = compose_sum(nets, [1.0] * M) if mode == "wide" else compose_stack(nets)
    report = {
        "mode": mode,
        "D": D,
        "M": M,
        "exact": False,
        "delta": float(delta),
        "params": asdict(params),
        "budget": M * piece_budget(mode, D, params),
        "max_residual": max(s.residual for s in solves),
        "metrics": _metrics_dict(out),
        "piece_metrics": _metrics_dict(nets[0]),
    }
    return TransformResult(out, report)
