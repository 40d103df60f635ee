"""Network data model: DAG of neurons with shortcut edges.

A network is a topologically ordered list of neurons.  Each neuron applies
an activation to an affine combination of network inputs (``"x0"``,
``"x1"``, ...) and/or earlier neurons (integer ids).  A single linear
readout combines neurons into the scalar output.

Width and depth are route based.  The length of a route is the number of
affine operations from the input to a node; a neuron sits in every layer
for which it has a route of that length.  Identity neurons are linear
relays: they lengthen routes (they are affine operations) but are not
counted in any layer's width.  The readout counts as one more affine
operation unless it just forwards a single neuron (weight 1, bias 0).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from netmorph.errors import InputError, NetworkParseError

DOCUMENT_VERSION = 1
_EVAL_CHUNK = 8192
_UNIT_ROUNDOFF = 2.0**-53
# cap on the evaluation buffer (ncols x chunk doubles)
_BUFFER_CELLS = 1 << 23


def _chunk_size(ncols):
    return int(max(64, min(_EVAL_CHUNK, _BUFFER_CELLS // max(ncols, 1))))


class Activation(str, enum.Enum):
    RELU = "relu"
    STEP = "step"
    IDENTITY = "identity"


def input_ref(k):
    return f"x{k}"


def _input_index(src):
    return int(src[1:])


def _is_input(src):
    return isinstance(src, str)


@dataclass(frozen=True)
class Neuron:
    id: int
    incoming: tuple
    bias: float
    activation: Activation


@dataclass(frozen=True)
class StructureMetrics:
    width: int
    depth: int
    neuron_count: int
    parameter_count: int


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable DAG network with one linear readout.

    ``output_terms`` is a tuple of ``(neuron_id, weight)``.
    """

    input_dim: int
    neurons: tuple
    output_terms: tuple
    output_bias: float = 0.0

    def __post_init__(self):
        if not isinstance(self.input_dim, (int, np.integer)) or self.input_dim < 1:
            raise InputError(f"input_dim must be a positive integer, got {self.input_dim!r}")
        seen = set()
        for pos, neuron in enumerate(self.neurons):
            if neuron.id in seen:
                raise InputError(f"duplicate neuron id {neuron.id}")
            if not neuron.incoming:
                raise InputError(f"neuron {neuron.id} has no incoming edges")
            for src, w in neuron.incoming:
                if _is_input(src):
                    if not 0 <= _input_index(src) < self.input_dim:
                        raise InputError(f"neuron {neuron.id} reads unknown input {src}")
                elif src not in seen:
                    raise InputError(
                        f"neuron {neuron.id} reads {src}, which does not precede it"
                    )
                if not math.isfinite(w):
                    raise InputError(f"neuron {neuron.id} has a non-finite weight")
            if not math.isfinite(neuron.bias):
                raise InputError(f"neuron {neuron.id} has a non-finite bias")
            seen.add(neuron.id)
        for nid, w in self.output_terms:
            if nid not in seen:
                raise InputError(f"readout references unknown neuron {nid}")
            if not math.isfinite(w):
                raise InputError("readout has a non-finite weight")
        if not math.isfinite(self.output_bias):
            raise InputError("readout bias is not finite")

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.input_dim == other.input_dim
            and self.neurons == other.neurons
            and self.output_terms == other.output_terms
            and self.output_bias == other.output_bias
        )

    __hash__ = object.__hash__

    @cached_property
    def _compiled(self):
        return _compile(self)

    @cached_property
    def _abs_stages(self):
        _, stages, readout = self._compiled
        out = []
        for mat, _, bias, _, _ in stages:
            nnz = np.diff(mat.indptr)
            factor = (nnz + 1) * _UNIT_ROUNDOFF
            # a lone power-of-two weight with zero bias (e.g. a relay) is exact
            first = mat.data[np.minimum(mat.indptr[:-1], max(mat.nnz - 1, 0))]
            exact = (nnz == 1) & (bias[:, 0] == 0.0) & (np.frexp(first)[0] == 0.5)
            factor[exact] = 0.0
            out.append((abs(mat), np.abs(bias), factor[:, None]))
        nz = readout[readout != 0]
        lone = nz.size == 1 and self.output_bias == 0.0 and np.frexp(nz[0])[0] == 0.5
        factor = 0.0 if lone else (nz.size + 1) * _UNIT_ROUNDOFF
        return out, np.abs(readout), factor

    @cached_property
    def _route_masks(self):
        masks = {}
        for neuron in self.neurons:
            m = 0
            for src, _ in neuron.incoming:
                m |= 1 << 1 if _is_input(src) else masks[src] << 1
            masks[neuron.id] = m
        return masks

    def neuron(self, nid):
        return self._by_id[nid]

    @cached_property
    def _by_id(self):
        return {n.id: n for n in self.neurons}

    def __call__(self, x):
        return evaluate(self, x)


# --------------------------------------------------------------------- eval


def _compile(net):
    d = net.input_dim
    col = {input_ref(k): k for k in range(d)}
    level = {}
    for j, neuron in enumerate(net.neurons):
        col[neuron.id] = d + j
        lv = 0
        for src, _ in neuron.incoming:
            if not _is_input(src):
                lv = max(lv, level[src])
        level[neuron.id] = lv + 1
    ncols = d + len(net.neurons)
    by_level = {}
    for neuron in net.neurons:
        by_level.setdefault(level[neuron.id], []).append(neuron)
    stages = []
    for lv in sorted(by_level):
        group = by_level[lv]
        rows, cols, vals = [], [], []
        for r, neuron in enumerate(group):
            for src, w in neuron.incoming:
                rows.append(r)
                cols.append(col[src])
                vals.append(w)
        mat = sparse.csr_matrix(
            (np.asarray(vals, float), (rows, cols)), shape=(len(group), ncols)
        )
        mat.sum_duplicates()
        out_cols = np.array([col[n.id] for n in group])
        bias = np.array([n.bias for n in group])[:, None]
        kinds = np.array([n.activation.value for n in group])
        stages.append((mat, out_cols, bias, kinds == "relu", kinds == "step"))
    readout = np.zeros(ncols)
    for nid, w in net.output_terms:
        readout[col[nid]] += w
    return ncols, stages, readout


def evaluate(net, x):
    """Forward value of ``net`` at ``x``.

    ``x`` of shape ``(D,)`` gives a float; shape ``(n, D)`` gives an array
    of ``n`` outputs.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != net.input_dim:
        raise InputError(
            f"expected points of dimension {net.input_dim}, got shape {x.shape}"
        )
    ncols, stages, readout = net._compiled
    out = np.empty(pts.shape[0])
    step_n = _chunk_size(ncols)
    for start in range(0, pts.shape[0], step_n):
        chunk = pts[start : start + step_n]
        buf = np.zeros((ncols, chunk.shape[0]))
        buf[: net.input_dim] = chunk.T
        for mat, out_cols, bias, relu, step in stages:
            pre = mat @ buf + bias
            if relu.any():
                pre[relu] = np.maximum(pre[relu], 0.0)
            if step.any():
                pre[step] = (pre[step] >= 0.0).astype(float)
            buf[out_cols] = pre
        out[start : start + chunk.shape[0]] = readout @ buf + net.output_bias
    return float(out[0]) if single else out


def preactivations(net, x):
    """Pre-activation values of every neuron, shape ``(n, len(net.neurons))``.

    Columns follow ``net.neurons`` order.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != net.input_dim:
        raise InputError(f"expected points of dimension {net.input_dim}")
    ncols, stages, _ = net._compiled
    d = net.input_dim
    pre_all = np.empty((len(net.neurons), pts.shape[0]))
    step_n = _chunk_size(ncols)
    for start in range(0, pts.shape[0], step_n):
        chunk = pts[start : start + step_n]
        buf = np.zeros((ncols, chunk.shape[0]))
        buf[:d] = chunk.T
        for mat, out_cols, bias, relu, step in stages:
            pre = mat @ buf + bias
            pre_all[out_cols - d, start : start + chunk.shape[0]] = pre
            if relu.any():
                pre[relu] = np.maximum(pre[relu], 0.0)
            if step.any():
                pre[step] = (pre[step] >= 0.0).astype(float)
            buf[out_cols] = pre
    return pre_all.T


def evaluate_with_bound(net, x):
    """Forward values plus a running bound on their float64 rounding error.

    Each affine step adds ``(n+1) u (|W||v| + |b|)`` to the propagated
    error ``|W| e`` (u the unit roundoff, n the fan-in); a ReLU whose
    pre-activation is certainly negative returns an exact zero.  The bound
    is first order in u.  Step neurons whose input lies within its error
    bound get an infinite bound (the output could flip).
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if pts.shape[1] != net.input_dim:
        raise InputError(f"expected points of dimension {net.input_dim}")
    ncols, stages, readout = net._compiled
    abs_stages, abs_readout, out_factor = net._abs_stages
    d = net.input_dim
    vals = np.empty(pts.shape[0])
    errs = np.empty(pts.shape[0])
    step_n = _chunk_size(3 * ncols)
    for start in range(0, pts.shape[0], step_n):
        chunk = pts[start : start + step_n]
        buf = np.zeros((ncols, chunk.shape[0]))
        err = np.zeros_like(buf)
        mag = np.zeros_like(buf)
        buf[:d] = chunk.T
        mag[:d] = np.abs(chunk.T)
        for (mat, out_cols, bias, relu, step), (amat, abias, factor) in zip(stages, abs_stages):
            pre = mat @ buf + bias
            e = amat @ err + factor * (amat @ mag + abias)
            if relu.any():
                r_pre, r_e = pre[relu], e[relu]
                dead = r_pre <= -r_e
                r_e[dead] = 0.0
                pre[relu] = np.maximum(r_pre, 0.0)
                e[relu] = r_e
            if step.any():
                s_pre, s_e = pre[step], e[step]
                pre[step] = (s_pre >= 0.0).astype(float)
                e[step] = np.where(np.abs(s_pre) <= s_e, np.inf, 0.0)
            buf[out_cols] = pre
            err[out_cols] = e
            mag[out_cols] = np.abs(pre)
        sl = slice(start, start + chunk.shape[0])
        vals[sl] = readout @ buf + net.output_bias
        errs[sl] = abs_readout @ err + out_factor * (
            abs_readout @ mag + abs(net.output_bias)
        )
    return vals, errs


# ------------------------------------------------------------------ metrics


def _readout_is_passthrough(net):
    return (
        len(net.output_terms) == 1
        and net.output_terms[0][1] == 1.0
        and net.output_bias == 0.0
    )


def structure_metrics(net):
    """Route-based width/depth plus neuron and parameter counts.

    Identity relays are excluded from width and from ``neuron_count``.
    """
    masks = net._route_masks
    layer_sizes = {}
    for neuron in net.neurons:
        if neuron.activation is Activation.IDENTITY:
            continue
        m = masks[neuron.id]
        length = 0
        while m:
            if m & 1:
                layer_sizes[length] = layer_sizes.get(length, 0) + 1
            m >>= 1
            length += 1
    width = max(layer_sizes.values(), default=0)
    if not net.output_terms:
        depth = 1
    elif _readout_is_passthrough(net):
        depth = masks[net.output_terms[0][0]].bit_length() - 1
    else:
        depth = max(masks[nid].bit_length() for nid, _ in net.output_terms)
    params = sum(len(n.incoming) + 1 for n in net.neurons) + len(net.output_terms) + 1
    computing = sum(1 for n in net.neurons if n.activation is not Activation.IDENTITY)
    return StructureMetrics(width, depth, computing, params)


def route_level(net, nid):
    """Longest route length from the input to neuron ``nid``."""
    return net._route_masks[nid].bit_length() - 1


# ------------------------------------------------------------------ builder


class NetworkBuilder:
    """Incremental construction of a :class:`Network`.

    ``input(k, level)`` hands out a source carrying ``x_k`` whose longest
    route has length ``level``; levels above zero are realized with a chain
    of identity relays shared by every caller.
    """

    def __init__(self, input_dim):
        self.input_dim = int(input_dim)
        self._neurons = []
        self._level = {}
        self._relays = {}

    def input(self, k, level=0):
        if not 0 <= k < self.input_dim:
            raise InputError(f"input index {k} out of range")
        if level == 0:
            return input_ref(k)
        key = (k, level)
        if key not in self._relays:
            prev = self.input(k, level - 1)
            self._relays[key] = self.add([(prev, 1.0)], 0.0, Activation.IDENTITY)
        return self._relays[key]

    def inputs(self, level=0):
        return [self.input(k, level) for k in range(self.input_dim)]

    def level_of(self, src):
        return 0 if _is_input(src) else self._level[src]

    def add(self, incoming, bias=0.0, activation=Activation.RELU):
        nid = len(self._neurons)
        incoming = tuple((src, float(w)) for src, w in incoming)
        lv = max((self.level_of(src) for src, _ in incoming), default=0) + 1
        self._neurons.append(Neuron(nid, incoming, float(bias), Activation(activation)))
        self._level[nid] = lv
        return nid

    def affine(self, coeffs, const, level=0):
        """Incoming list for ``coeffs . x + const`` read at ``level``."""
        return [
            (self.input(k, level), float(c)) for k, c in enumerate(coeffs) if c != 0.0
        ] or [(self.input(0, level), 0.0)]

    def add_network(self, net, level=0):
        """Embed ``net``; its inputs are read at ``level``.

        Returns the embedded readout as ``(terms, bias)``.
        """
        if net.input_dim != self.input_dim:
            raise InputError("input dimension mismatch")
        remap = {}
        for neuron in net.neurons:
            incoming = [
                (self.input(_input_index(src), level) if _is_input(src) else remap[src], w)
                for src, w in neuron.incoming
            ]
            remap[neuron.id] = self.add(incoming, neuron.bias, neuron.activation)
        terms = [(remap[nid], w) for nid, w in net.output_terms]
        return terms, net.output_bias

    def build(self, terms, bias=0.0):
        return Network(
            self.input_dim,
            tuple(self._neurons),
            tuple((nid, float(w)) for nid, w in terms),
            float(bias),
        )


# -------------------------------------------------------------- composition


def compose_sum(nets, weights, bias=0.0):
    """Parallel aggregation: ``bias + sum(w_i * net_i(x))``."""
    nets = list(nets)
    weights = list(weights)
    if len(nets) != len(weights):
        raise InputError("nets and weights differ in length")
    if not nets:
        raise InputError("compose_sum needs at least one network")
    dim = nets[0].input_dim
    builder = NetworkBuilder(dim)
    terms = []
    total = float(bias)
    for net, w in zip(nets, weights):
        if net.input_dim != dim:
            raise InputError("all networks must share input_dim")
        sub_terms, sub_bias = builder.add_network(net)
        terms.extend((nid, w * tw) for nid, tw in sub_terms)
        total += w * sub_bias
    return builder.build(terms, total)


def compose_stack(blocks):
    """Longitudinal stacking: output ``sum_m block_m(x)``.

    Block ``m`` reads ``x`` through identity relays positioned after block
    ``m-1``, and its readout is folded into an identity carrier
    ``t_m = block_m(x) + t_{m-1}``.  Depth therefore adds per block while
    width stays at the widest block.
    """
    blocks = list(blocks)
    if not blocks:
        raise InputError("compose_stack needs at least one block")
    dim = blocks[0].input_dim
    builder = NetworkBuilder(dim)
    carrier = None
    offset = 0
    for block in blocks:
        if block.input_dim != dim:
            raise InputError("all blocks must share input_dim")
        terms, bias = builder.add_network(block, level=offset)
        if carrier is not None:
            terms = terms + [(carrier, 1.0)]
        if not terms:
            terms = [(builder.input(0, offset), 0.0)]
        carrier = builder.add(terms, bias, Activation.IDENTITY)
        offset = builder.level_of(carrier)
    return builder.build([(carrier, 1.0)], 0.0)


def label_network(net, threshold=0.0):
    """Append a binary-step output neuron: ``z(net(x) - threshold)``."""
    builder = NetworkBuilder(net.input_dim)
    terms, bias = builder.add_network(net)
    if not terms:
        terms = [(builder.input(0), 0.0)]
    out = builder.add(terms, bias - threshold, Activation.STEP)
    return builder.build([(out, 1.0)], 0.0)


def constant_network(input_dim, value=0.0):
    return Network(int(input_dim), (), (), float(value))


# ------------------------------------------------------------ serialization


def to_document(net):
    return {
        "version": DOCUMENT_VERSION,
        "input_dim": net.input_dim,
        "neurons": [
            {
                "id": n.id,
                "activation": n.activation.value,
                "bias": n.bias,
                "in": [[src, w] for src, w in n.incoming],
            }
            for n in net.neurons
        ],
        "output": {
            "bias": net.output_bias,
            "terms": [[nid, w] for nid, w in net.output_terms],
        },
    }


def serialize(net):
    """JSON text; floats use shortest round-trip repr, so weights are exact."""
    return json.dumps(to_document(net), allow_nan=False)


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise NetworkParseError(f"expected a number, got {value!r}", where)
    value = float(value)
    if not math.isfinite(value):
        raise NetworkParseError("non-finite number", where)
    return value


def _require(doc, key, where):
    if not isinstance(doc, dict):
        raise NetworkParseError("expected an object", where)
    if key not in doc:
        raise NetworkParseError(f"missing key {key!r}", where)
    return doc[key]


def from_document(doc):
    version = _require(doc, "version", "")
    if version != DOCUMENT_VERSION:
        raise NetworkParseError(f"unsupported version {version!r}", "version")
    dim = _require(doc, "input_dim", "")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise NetworkParseError("input_dim must be a positive integer", "input_dim")
    raw_neurons = _require(doc, "neurons", "")
    if not isinstance(raw_neurons, list):
        raise NetworkParseError("expected a list", "neurons")
    parsed = {}
    order = []
    for i, raw in enumerate(raw_neurons):
        where = f"neurons/{i}"
        nid = _require(raw, "id", where)
        if isinstance(nid, bool) or not isinstance(nid, int):
            raise NetworkParseError("id must be an integer", f"{where}/id")
        if nid in parsed:
            raise NetworkParseError(f"duplicate id {nid}", f"{where}/id")
        act = _require(raw, "activation", where)
        try:
            act = Activation(act)
        except ValueError:
            raise NetworkParseError(f"unknown activation {act!r}", f"{where}/activation")
        bias = _number(_require(raw, "bias", where), f"{where}/bias")
        edges = _require(raw, "in", where)
        if not isinstance(edges, list) or not edges:
            raise NetworkParseError("expected a non-empty list", f"{where}/in")
        incoming = []
        for j, edge in enumerate(edges):
            ewhere = f"{where}/in/{j}"
            if not isinstance(edge, list) or len(edge) != 2:
                raise NetworkParseError("expected [source, weight]", ewhere)
            src, w = edge
            if isinstance(src, str):
                if not (src.startswith("x") and src[1:].isdigit() and int(src[1:]) < dim):
                    raise NetworkParseError(f"unknown input {src!r}", ewhere)
            elif isinstance(src, bool) or not isinstance(src, int):
                raise NetworkParseError(f"bad source {src!r}", ewhere)
            incoming.append((src, _number(w, f"{ewhere}/1")))
        parsed[nid] = (i, Neuron(nid, tuple(incoming), bias, act))
        order.append(nid)
    for nid in order:
        i, neuron = parsed[nid]
        for j, (src, _) in enumerate(neuron.incoming):
            if not _is_input(src) and src not in parsed:
                raise NetworkParseError(f"unknown neuron {src}", f"neurons/{i}/in/{j}")
    # Kahn's algorithm; document order breaks ties so valid files round-trip.
    indeg = {nid: 0 for nid in order}
    users = {nid: [] for nid in order}
    for nid in order:
        for src, _ in parsed[nid][1].incoming:
            if not _is_input(src):
                indeg[nid] += 1
                users[src].append(nid)
    ready = [nid for nid in order if indeg[nid] == 0]
    ready.reverse()
    topo = []
    while ready:
        nid = ready.pop()
        topo.append(nid)
        for user in reversed(users[nid]):
            indeg[user] -= 1
            if indeg[user] == 0:
                ready.append(user)
    if len(topo) != len(order):
        stuck = next(nid for nid in order if indeg[nid] > 0)
        raise NetworkParseError("cycle detected", f"neurons/{parsed[stuck][0]}")
    out = _require(doc, "output", "")
    obias = _number(_require(out, "bias", "output"), "output/bias")
    raw_terms = _require(out, "terms", "output")
    if not isinstance(raw_terms, list):
        raise NetworkParseError("expected a list", "output/terms")
    terms = []
    for j, term in enumerate(raw_terms):
        where = f"output/terms/{j}"
        if not isinstance(term, list) or len(term) != 2 or term[0] not in parsed:
            raise NetworkParseError("expected [neuron-id, weight]", where)
        terms.append((term[0], _number(term[1], f"{where}/1")))
    return Network(dim, tuple(parsed[nid][1] for nid in topo), tuple(terms), obias)


def deserialize(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return from_document(doc)
