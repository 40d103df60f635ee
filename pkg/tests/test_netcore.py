import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netmorph.errors import InputError, NetworkParseError
from netmorph.fanshape import FanSpec, build_fan_2d
from netmorph.netcore import (
    Activation,
    Network,
    NetworkBuilder,
    Neuron,
    compose_stack,
    compose_sum,
    constant_network,
    deserialize,
    evaluate,
    evaluate_with_bound,
    label_network,
    preactivations,
    serialize,
    structure_metrics,
)


def relu_net(w=1.0, b=0.0):
    nb = NetworkBuilder(1)
    n = nb.add([("x0", w)], b)
    return nb.build([(n, 1.0)])


def test_evaluate_scalar_and_batch():
    net = relu_net()
    assert evaluate(net, [2.0]) == 2.0
    assert evaluate(net, [-1.0]) == 0.0
    np.testing.assert_array_equal(evaluate(net, [[1.0], [-3.0]]), [1.0, 0.0])


def test_evaluate_rejects_wrong_dimension():
    with pytest.raises(InputError):
        evaluate(relu_net(), [[1.0, 2.0]])


def test_step_activation_is_closed_at_zero():
    nb = NetworkBuilder(1)
    n = nb.add([("x0", 1.0)], 0.0, Activation.STEP)
    net = nb.build([(n, 1.0)])
    np.testing.assert_array_equal(evaluate(net, [[0.0], [-1e-300], [3.0]]), [1.0, 0.0, 1.0])


def test_network_validates_order_and_values():
    with pytest.raises(InputError):
        Network(1, (Neuron(0, ((1, 1.0),), 0.0, Activation.RELU),), ())
    with pytest.raises(InputError):
        Network(1, (Neuron(0, (), 0.0, Activation.RELU),), ())
    with pytest.raises(InputError):
        Network(1, (Neuron(0, (("x0", float("nan")),), 0.0, Activation.RELU),), ())
    with pytest.raises(InputError):
        Network(1, (Neuron(0, (("x3", 1.0),), 0.0, Activation.RELU),), ())


def test_fan_metrics_two_by_two():
    spec = FanSpec([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 10.0)
    m = structure_metrics(build_fan_2d(spec))
    assert (m.width, m.depth) == (2, 2)


def test_readout_adds_depth_unless_passthrough():
    nb = NetworkBuilder(1)
    n = nb.add([("x0", 1.0)])
    assert structure_metrics(nb.build([(n, 1.0)])).depth == 1
    assert structure_metrics(nb.build([(n, 2.0)])).depth == 2
    assert structure_metrics(nb.build([(n, 1.0)], 0.5)).depth == 2


def test_shortcut_neuron_counts_in_two_layers():
    nb = NetworkBuilder(1)
    a = nb.add([("x0", 1.0)])
    b = nb.add([("x0", 1.0)])
    c = nb.add([(a, 1.0), ("x0", 1.0)])
    m = structure_metrics(nb.build([(c, 1.0), (b, 1.0)]))
    # layer 1 holds a, b and c (via its x shortcut)
    assert m.width == 3
    assert m.depth == 3


def test_compose_sum_and_stack_agree():
    nets = [relu_net(1.0, -0.5), relu_net(-2.0, 0.25), relu_net(0.5, 0.0)]
    x = np.linspace(-2, 2, 101)[:, None]
    expected = sum(evaluate(n, x) for n in nets)
    np.testing.assert_allclose(evaluate(compose_sum(nets, [1, 1, 1]), x), expected)
    stacked = compose_stack(nets)
    np.testing.assert_allclose(evaluate(stacked, x), expected)
    m = structure_metrics(stacked)
    assert m.width == 1
    assert m.depth == 6


def test_label_network_and_constant():
    lab = label_network(relu_net(1.0, -1.0), threshold=0.5)
    np.testing.assert_array_equal(evaluate(lab, [[0.0], [1.5], [1.6]]), [0.0, 1.0, 1.0])
    assert evaluate(constant_network(3, 2.5), [0, 0, 0]) == 2.5
    assert structure_metrics(constant_network(2)).width == 0


def test_preactivations_columns_follow_neurons():
    nb = NetworkBuilder(2)
    a = nb.add([("x0", 1.0), ("x1", -1.0)], 0.5)
    b = nb.add([(a, 2.0)], -1.0)
    net = nb.build([(b, 1.0)])
    pre = preactivations(net, [[1.0, 3.0]])
    np.testing.assert_allclose(pre, [[-1.5, -1.0]])


def test_error_bound_covers_exact_value():
    rng = np.random.default_rng(0)
    nb = NetworkBuilder(2)
    layer = [nb.add([("x0", w0), ("x1", w1)], b) for w0, w1, b in rng.normal(size=(20, 3)) * 1e3]
    top = nb.add([(n, w) for n, w in zip(layer, rng.normal(size=20))], 0.1)
    net = nb.build([(top, 1.0)], -0.3)
    x = rng.uniform(-1, 1, (500, 2))
    vals, errs = evaluate_with_bound(net, x)
    np.testing.assert_array_equal(vals, evaluate(net, x))
    # exact reference in extended precision
    from fractions import Fraction
    for xi, v, e in zip(x[:20], vals[:20], errs[:20]):
        acts = {}
        for n in net.neurons:
            s = Fraction(n.bias)
            for src, w in n.incoming:
                s += Fraction(w) * (Fraction(float(xi[int(src[1:])])) if isinstance(src, str) else acts[src])
            acts[n.id] = max(s, Fraction(0))
        exact = sum(Fraction(w) * acts[i] for i, w in net.output_terms) + Fraction(net.output_bias)
        assert abs(float(exact) - v) <= e + 1e-300


def test_relay_rows_carry_no_rounding():
    nb = NetworkBuilder(1)
    r = nb.input(0, 3)
    n = nb.add([(r, 1.0)])
    _, errs = evaluate_with_bound(nb.build([(n, 1.0)]), [[0.3]])
    assert errs[0] == 0.0


def test_serialize_round_trip_is_exact():
    nb = NetworkBuilder(2)
    a = nb.add([("x0", 0.1), ("x1", 1 / 3)], np.pi)
    b = nb.add([(a, -2.5e-17), ("x1", 1.0)], 0.0, Activation.STEP)
    c = nb.add([(b, 1.0)], 0.0, Activation.IDENTITY)
    net = nb.build([(a, 0.7), (c, -1.0)], 1e300)
    assert deserialize(serialize(net)) == net


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=8),
       st.floats(-10, 10))
def test_serialize_round_trip_property(rows, bias):
    nb = NetworkBuilder(1)
    ids = [nb.add([("x0", w)], b) for w, b in rows]
    net = nb.build([(i, 1.0) for i in ids], bias)
    back = deserialize(serialize(net))
    assert back == net
    x = np.linspace(-3, 3, 7)[:, None]
    np.testing.assert_array_equal(evaluate(back, x), evaluate(net, x))


def test_deserialize_accepts_any_neuron_order():
    doc = json.loads(serialize(relu_net()))
    doc["neurons"].append({"id": 7, "activation": "identity", "bias": 0.0, "in": [["x0", 2.0]]})
    doc["neurons"].reverse()
    doc["output"]["terms"].append([7, 1.0])
    net = deserialize(json.dumps(doc))
    assert evaluate(net, [1.5]) == 1.5 + 3.0


@pytest.mark.parametrize(
    "mutate, location",
    [
        (lambda d: d["neurons"][0].update(bias="x"), "neurons/0/bias"),
        (lambda d: d["neurons"][0]["in"][0].__setitem__(1, None), "neurons/0/in/0"),
        (lambda d: d["neurons"][0].update(activation="tanh"), "neurons/0/activation"),
        (lambda d: d.update(input_dim=0), "input_dim"),
        (lambda d: d.update(version=9), "version"),
    ],
)
def test_parse_errors_carry_location(mutate, location):
    doc = json.loads(serialize(relu_net()))
    mutate(doc)
    with pytest.raises(NetworkParseError) as info:
        deserialize(json.dumps(doc))
    assert info.value.location.startswith(location)


def test_parse_detects_cycles_and_bad_json():
    doc = {"version": 1, "input_dim": 1, "neurons": [
        {"id": 0, "activation": "relu", "bias": 0.0, "in": [[1, 1.0]]},
        {"id": 1, "activation": "relu", "bias": 0.0, "in": [[0, 1.0]]},
    ], "output": {"bias": 0.0, "terms": [[1, 1.0]]}}
    with pytest.raises(NetworkParseError, match="cycle"):
        deserialize(json.dumps(doc))
    with pytest.raises(NetworkParseError, match="line 1"):
        deserialize("{")
