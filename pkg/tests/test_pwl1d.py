import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netmorph.errors import DegeneratePieceError, InputError, UnsupportedNetworkError
from netmorph.fixtures import net_pwl5
from netmorph.netcore import Activation, NetworkBuilder, evaluate, structure_metrics
from netmorph.pwl1d import PwlFunction1D, build_deep, build_wide, extract_pwl, random_pwl


def test_relu_itself():
    # f = relu on [-1, 1]: one interior breakpoint at 0
    f = PwlFunction1D(1.0, [-1.0, 0.0, 1.0], [0.0, 1.0], 0.0)
    wide, deep = build_wide(f), build_deep(f)
    x = np.linspace(-1, 1, 201)[:, None]
    np.testing.assert_allclose(evaluate(wide, x), np.maximum(x[:, 0], 0), atol=1e-15)
    np.testing.assert_allclose(evaluate(deep, x), np.maximum(x[:, 0], 0), atol=1e-15)
    assert (structure_metrics(wide).width, structure_metrics(wide).depth) == (2, 2)
    assert (structure_metrics(deep).width, structure_metrics(deep).depth) == (1, 3)


def test_fixture_pwl5_has_five_pieces():
    f = extract_pwl(net_pwl5(), 2.0)
    assert f.slopes.size == 5
    np.testing.assert_allclose(f.breakpoints, [-2, -1.5, -1, 0, 1, 2])
    np.testing.assert_allclose(f.slopes, [0, 1, -1, 0.5, -0.75])


def test_validation():
    with pytest.raises(InputError):
        PwlFunction1D(1.0, [-1.0, 1.0], [1.0, 2.0], 0.0)
    with pytest.raises(InputError):
        PwlFunction1D(1.0, [-1.0, 0.5, 0.2, 1.0], [1.0, 2.0, 3.0], 0.0)
    with pytest.raises(DegeneratePieceError):
        PwlFunction1D(1.0, [-1.0, 0.0, 1.0], [1.0, 1.0], 0.0)


def test_from_knots_merges_collinear_pieces():
    f = PwlFunction1D.from_knots([-1, -0.5, 0, 1], [0, 0.5, 1, 0])
    np.testing.assert_allclose(f.breakpoints, [-1, 0, 1])
    np.testing.assert_allclose(f.slopes, [1, -1])


def test_extract_rejects_step_and_multivariate():
    nb = NetworkBuilder(1)
    n = nb.add([("x0", 1.0)], 0.0, Activation.STEP)
    with pytest.raises(UnsupportedNetworkError):
        extract_pwl(nb.build([(n, 1.0)]), 1.0)
    nb = NetworkBuilder(2)
    n = nb.add([("x0", 1.0)])
    with pytest.raises(UnsupportedNetworkError):
        extract_pwl(nb.build([(n, 1.0)]), 1.0)


def test_extract_through_deep_layers():
    nb = NetworkBuilder(1)
    a = nb.add([("x0", 2.0)], -0.3)
    b = nb.add([("x0", -1.0)], 0.2)
    c = nb.add([(a, 1.0), (b, -3.0)], 0.1)
    d = nb.add([(c, -1.0)], 0.5, Activation.IDENTITY)
    net = nb.build([(c, 1.5), (d, 0.5)], -0.2)
    f = extract_pwl(net, 1.0)
    x = np.linspace(-1, 1, 4001)
    np.testing.assert_allclose(f(x), evaluate(net, x[:, None]), atol=1e-12)


def test_flat_first_piece_deep_chain():
    f = PwlFunction1D(2.0, [-2.0, 0.0, 2.0], [0.0, 3.0], 1.0)
    x = np.linspace(-2, 2, 101)
    np.testing.assert_allclose(evaluate(build_deep(f), x[:, None]), f(x), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_wide_deep_extract_round_trip(n_pieces, seed):
    f = random_pwl(np.random.default_rng(seed), n_pieces, 2.0)
    x = np.concatenate([np.linspace(-2, 2, 1001), f.breakpoints])
    for net in (build_wide(f), build_deep(f)):
        np.testing.assert_allclose(evaluate(net, x[:, None]), f(x), atol=1e-9)
        g = extract_pwl(net, 2.0)
        assert g.slopes.size == f.slopes.size
        np.testing.assert_allclose(g.breakpoints, f.breakpoints, atol=1e-9)
    assert structure_metrics(build_wide(f)).width == f.n + 1
    assert structure_metrics(build_deep(f)).depth == f.n + 2


def test_document_round_trip():
    f = random_pwl(np.random.default_rng(1), 6, 1.5)
    assert PwlFunction1D.from_document(f.to_document()) == f
