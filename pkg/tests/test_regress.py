import itertools
import math
import warnings

import numpy as np
import pytest

from netmorph.errors import InfeasibleParametersError, InputError, UnsupportedNetworkError
from netmorph.fixtures import net_2621, net_pwl5, template_piece
from netmorph.geometry import LinearPiece, Simplex, SimplicialCover
from netmorph.netcore import evaluate, structure_metrics
from netmorph.regress import (
    _domain_fans,
    _gamma_system,
    _perturbations,
    build_deep_piece,
    build_wide_piece,
    choose_params,
    exact_solve,
    params_from_mu,
    piece_budget,
    solve_basis,
    transform,
    wide_domains,
)


@pytest.mark.parametrize(
    "mode, D, width, depth",
    [("wide", 2, 20, 3), ("deep", 2, 12, 4), ("deep", 3, 36, 5),
     ("wide", 4, 302, 5), ("deep", 4, 80, 6)],
)
def test_piece_metrics(mode, D, width, depth):
    piece = template_piece(D, a=np.ones(D), b=0.5)
    build = build_wide_piece if mode == "wide" else build_deep_piece
    m = structure_metrics(build(piece, params_from_mu(1e4, mode, D, 1.0)))
    assert (m.width, m.depth) == (width, depth)


def test_wide_d3_uses_eight_domains():
    # odd D: the sign-vector graph has no perfect matching, so 2^D domains
    assert len(wide_domains(3)) == 8
    m = structure_metrics(build_wide_piece(template_piece(3, np.ones(3), 0.5),
                                           params_from_mu(1e4, "wide", 3, 1.0)))
    assert (m.width, m.depth) == (3 * 4 * 8 + 2, 4)


@pytest.mark.parametrize("D", [2, 3, 4, 5])
def test_wide_domains_tile_the_complement(D):
    covered = []
    for dom in wide_domains(D):
        free = [k for k, s in enumerate(dom) if s is None]
        assert len(free) == 1
        for s in "+-":
            covered.append(tuple(s if v is None else v for v in dom))
    feasible = set(itertools.product("+-", repeat=D + 1)) - {tuple("+" * (D + 1)), tuple("-" * (D + 1))}
    assert feasible <= set(covered)
    # every feasible sign vector lies in exactly one domain
    assert sorted(v for v in covered if v in feasible) == sorted(feasible)


def test_omega_reference_example():
    # domain A(+, free, -) with a = (1, 1), b = 1, eta = 0.1
    s, j, gates = _domain_fans(("+", None, "-"), 2)
    assert (s, j) == (1.0, 0)
    base = np.array([1.0, 0.0, 0.0])
    cols = [base]
    for k in _perturbations(j, 2):
        col = base.copy()
        col[k] -= 0.1
        cols.append(col)
    omega = solve_basis(np.array(cols).T, [-1.0, -1.0, -1.0]).solution
    np.testing.assert_allclose(omega, [-21, 10, 10])


def test_deep_gamma_example():
    matrix, _ = _gamma_system(np.array([-1.0, -1.0]), 1.0, 0.1, 2)
    gamma = solve_basis(matrix, [-1.0, -1.0, 1.0], square_rows=slice(0, 2)).solution
    np.testing.assert_allclose(gamma, [-11, 10])


def test_exact_solve_matches_numpy():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    b = rng.normal(size=4)
    np.testing.assert_allclose(exact_solve(A, b), np.linalg.solve(A, b), rtol=1e-12)


def test_choose_params_half_bound():
    p = choose_params("wide", 2, 1.0, 0.01)
    assert p.eta == pytest.approx(0.01 / (30 * math.sqrt(2)) / 2)
    assert p.mu == pytest.approx(1 / p.eta)
    assert piece_budget("wide", 2, p) < 0.01
    q = choose_params("deep", 3, 1.0, 0.01)
    assert q.mu == pytest.approx(1 + 1 / q.nu)
    assert piece_budget("deep", 3, q) < 0.01
    assert choose_params("wide", 1, 1.0, 0.1).mu == math.inf


def test_choose_params_infeasible():
    with pytest.raises(InfeasibleParametersError) as info:
        choose_params("deep", 2, 1.0, 1e-12)
    assert info.value.min_delta > 1e-12


def test_per_piece_fidelity_3d():
    rng = np.random.default_rng(11)
    s = Simplex(np.array([[0, 0, 0], [0.6, 0.1, 0], [0.1, 0.7, 0.1], [0.1, 0.1, 0.5]]) - 0.2)
    piece = LinearPiece(s, [0.3, -1.0, 2.0], 0.4)
    x = rng.uniform(-1, 1, (20_000, 3))
    clear = np.min(np.abs(s.facet_distances(x)), axis=1) > 0.02
    for mode, build in (("wide", build_wide_piece), ("deep", build_deep_piece)):
        net = build(piece, params_from_mu(1e4, mode, 3, 1.0))
        np.testing.assert_allclose(evaluate(net, x[clear]), piece(x[clear]), atol=1e-6)


def test_transform_univariate_exact():
    res = transform(net_pwl5(), "deep", 0.01, 2.0)
    assert res.report["exact"] and res.report["max_abs_error"] < 1e-9
    assert res.report["metrics"]["depth"] == 6


def test_transform_fixture_reports():
    res = transform(net_2621(), "wide", 0.02, 3.0, samples=20_000)
    r = res.report
    assert r["M"] > 0 and r["budget"] <= 0.02
    assert r["metrics"]["depth"] == 3
    assert r["max_residual"] < 1e-6


def test_transform_mu_override_warns():
    with pytest.warns(RuntimeWarning, match="budget"):
        res = transform(net_2621(), "deep", 0.02, 3.0, mu=80, samples=20_000)
    assert res.report["params"]["mu"] == 80
    assert res.report["params"]["nu"] == 1 / 80


def test_transform_needs_cover_above_2d():
    from netmorph.netcore import NetworkBuilder

    nb = NetworkBuilder(3)
    n = nb.add([("x0", 1.0)])
    with pytest.raises(UnsupportedNetworkError):
        transform(nb.build([(n, 1.0)]), "wide", 0.1, 1.0)
    cover = SimplicialCover((template_piece(3, np.ones(3), 0.0),))
    res = transform(None, "deep", 0.1, 1.0, cover=cover)
    x = template_piece(3).simplex.sample(np.random.default_rng(0), 100) * 0.98 + 0.005
    np.testing.assert_allclose(evaluate(res.network, x), x.sum(axis=1), atol=1e-6)


def test_transform_rejects_bad_mode():
    with pytest.raises(InputError):
        transform(net_pwl5(), "tall", 0.1, 1.0)
