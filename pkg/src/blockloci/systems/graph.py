"""Block-oriented interconnections as directed graphs.

Nodes are the input, the output, sum junctions, linear dynamic blocks and
static nonlinearities. Every non-sum node has exactly one incoming edge;
a sum node adds its incoming edges, each scaled by the edge gain (a gain of
-1 makes a negative feedback junction).

``groups`` label sets of nodes for the structure-aware parts of the package
(branch gains, structure descriptors): ``ff``/``fb`` branches of the
parallel families and ``g1``..``g4``/``nl`` roles of the LFR and symmetric
families.
"""
import graphlib
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import GraphError
from .blocks import RationalTF, StaticNL

NODE_KINDS = ("input", "output", "sum", "linear", "nonlinear")
TOPOLOGIES = ("single_branch", "parallel_ff", "ff_fb_parallel", "lfr",
              "symmetric_fffb", "custom")

Block = Union[RationalTF, StaticNL]


@dataclass(frozen=True)
class Node:
    name: str
    kind: str
    block: Optional[Block] = None

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node {self.name!r}: unknown kind {self.kind!r}")
        want = {"linear": RationalTF, "nonlinear": StaticNL}.get(self.kind)
        if want is not None and not isinstance(self.block, want):
            raise GraphError(f"node {self.name!r}: {self.kind} node needs a {want.__name__}")
        if want is None and self.block is not None:
            raise GraphError(f"node {self.name!r}: {self.kind} node carries no block")


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    gain: float = 1.0


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.message}"


@dataclass(frozen=True)
class BlockGraph:
    nodes: Tuple[Node, ...]
    edges: Tuple[Edge, ...]
    topology: str = "custom"
    groups: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(Edge(e.src, e.dst, float(e.gain)) for e in self.edges))
        object.__setattr__(self, "groups", tuple((lab, tuple(ns)) for lab, ns in self.groups))
        if self.topology not in TOPOLOGIES:
            raise GraphError(f"unknown topology tag {self.topology!r}")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise GraphError("node names must be unique")
        object.__setattr__(self, "_index", {n.name: n for n in self.nodes})

    def node(self, name):
        return self._index[name]

    def __contains__(self, name):
        return name in self._index

    def incoming(self, name):
        return [e for e in self.edges if e.dst == name]

    def outgoing(self, name):
        return [e for e in self.edges if e.src == name]

    def of_kind(self, kind):
        return [n for n in self.nodes if n.kind == kind]

    @property
    def input(self):
        return self.of_kind("input")[0].name

    @property
    def output(self):
        return self.of_kind("output")[0].name

    def group(self, label):
        return [ns for lab, ns in self.groups if lab == label]

    def linear_blocks(self):
        return [n for n in self.nodes if n.kind == "linear"]

    def nonlinear_blocks(self):
        return [n for n in self.nodes if n.kind == "nonlinear"]

    def is_instantaneous(self, edge):
        """Whether ``edge.dst`` reacts to ``edge.src`` within the same sample."""
        dst = self.node(edge.dst)
        return not (dst.kind == "linear" and dst.block.effective_delay >= 1)

    def has_cycle(self):
        try:
            full_order(self)
        except GraphError:
            return True
        return False

    def to_dict(self):
        nodes = []
        for n in self.nodes:
            d = {"name": n.name, "kind": n.kind}
            if n.block is not None:
                d.update(n.block.to_dict())
            nodes.append(d)
        return {
            "topology": self.topology,
            "nodes": nodes,
            "edges": [[e.src, e.dst, e.gain] for e in self.edges],
            "groups": [[lab, list(ns)] for lab, ns in self.groups],
        }

    @classmethod
    def from_dict(cls, d):
        nodes = []
        for nd in d["nodes"]:
            kind = nd["kind"]
            block = None
            if kind == "linear":
                block = RationalTF(tuple(nd["num"]), tuple(nd.get("den", (1.0,))),
                                   int(nd.get("delay", 0)), bool(nd.get("stable", True)))
            elif kind == "nonlinear":
                block = nl_from_dict(nd)
            nodes.append(Node(nd["name"], kind, block))
        edges = [Edge(e[0], e[1], e[2] if len(e) > 2 else 1.0) for e in d["edges"]]
        groups = [(g[0], tuple(g[1])) for g in d.get("groups", ())]
        return cls(tuple(nodes), tuple(edges), d.get("topology", "custom"), tuple(groups))


def nl_from_dict(d):
    if "poly" in d:
        return StaticNL.polynomial(d["poly"])
    if "pieces" in d:
        return StaticNL.piecewise(d.get("breakpoints", ()), d["pieces"])
    raise GraphError("nonlinearity needs 'poly' or 'pieces'")


def _sorted(graph, instantaneous_only):
    ts = graphlib.TopologicalSorter()
    for n in graph.nodes:
        ts.add(n.name)
    for e in graph.edges:
        if e.src in graph and e.dst in graph:
            if not instantaneous_only or graph.is_instantaneous(e):
                ts.add(e.dst, e.src)
    try:
        return list(ts.static_order())
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        raise GraphError(" -> ".join(cycle)) from None


def evaluation_order(graph):
    """Per-sample evaluation order; delayed linear blocks come early."""
    try:
        return _sorted(graph, True)
    except GraphError as exc:
        raise GraphError(f"algebraic loop: {exc}") from None


def full_order(graph):
    """Topological order of the whole graph; fails on any feedback loop."""
    return _sorted(graph, False)


def _reachable(graph, start, forward=True):
    seen, stack = {start}, [start]
    while stack:
        cur = stack.pop()
        nxt = graph.outgoing(cur) if forward else graph.incoming(cur)
        for e in nxt:
            other = e.dst if forward else e.src
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return seen


def validate_graph(graph):
    """Diagnose structural problems.

    Returns
    -------
    list of Violation
        Empty when the graph is valid.
    """
    out = []
    add = lambda code, msg: out.append(Violation(code, msg))
    inputs, outputs = graph.of_kind("input"), graph.of_kind("output")
    if len(inputs) != 1:
        add("io", f"expected exactly one input node, found {len(inputs)}")
    if len(outputs) != 1:
        add("io", f"expected exactly one output node, found {len(outputs)}")
    for e in graph.edges:
        for end in (e.src, e.dst):
            if end not in graph:
                add("edge", f"edge {e.src}->{e.dst} references unknown node {end!r}")
    if out:
        return out

    for n in graph.nodes:
        deg = len(graph.incoming(n.name))
        if n.kind == "input" and deg:
            add("degree", f"input node {n.name!r} has incoming edges")
        elif n.kind == "sum" and deg < 1:
            add("degree", f"sum node {n.name!r} has no inputs")
        elif n.kind in ("linear", "nonlinear", "output") and deg != 1:
            add("degree", f"{n.kind} node {n.name!r} needs exactly one input, has {deg}")

    fwd = _reachable(graph, graph.input, True)
    bwd = _reachable(graph, graph.output, False)
    for n in graph.nodes:
        if n.name not in fwd:
            add("disconnected", f"node {n.name!r} is not reachable from the input")
        elif n.name not in bwd:
            add("disconnected", f"node {n.name!r} does not reach the output")

    try:
        evaluation_order(graph)
    except GraphError as exc:
        add("algebraic_loop", str(exc))

    for n in graph.linear_blocks():
        if n.block.stable and not n.block.is_stable():
            add("unstable", f"block {n.name!r} is declared stable but has poles on or outside the unit circle")

    out.extend(_check_topology(graph))
    return out


def _check_topology(graph):
    tag = graph.topology
    bad = lambda msg: [Violation("topology", f"{tag}: {msg}")]
    for lab, ns in graph.groups:
        for name in ns:
            if name not in graph:
                return bad(f"group {lab!r} names unknown node {name!r}")
    labels = [lab for lab, _ in graph.groups]
    cyclic = graph.has_cycle()
    if tag == "custom":
        return []
    if tag == "single_branch":
        if cyclic or graph.of_kind("sum") or labels != ["ff"]:
            return bad("expected an acyclic chain without sum junctions")
    elif tag == "parallel_ff":
        if cyclic or labels.count("ff") < 2 or "fb" in labels:
            return bad("expected two or more feed-forward branches and no feedback")
    elif tag == "ff_fb_parallel":
        if not cyclic or labels.count("ff") < 1 or labels.count("fb") < 1:
            return bad("expected feed-forward and feedback branches closing a loop")
    elif tag == "lfr":
        if not cyclic or not {"g1", "g2", "g3", "nl"} <= set(labels):
            return bad("expected roles g1, g2, g3, nl and a loop through g3")
    elif tag == "symmetric_fffb":
        roles = set(labels)
        if not cyclic or not {"g1", "g2"} <= roles or not ({"nl"} <= roles or {"nl1", "nl2"} <= roles):
            return bad("expected roles g1, g2 and nl (or nl1, nl2) with a loop through g2")
    return []


def check_graph(graph):
    problems = validate_graph(graph)
    if problems:
        raise GraphError("; ".join(str(p) for p in problems))
    return graph


# ---------------------------------------------------------------- builders


class _Builder:
    def __init__(self):
        self.nodes, self.edges, self.groups = [], [], []
        self._names = set()

    def node(self, name, kind, block=None):
        base, k = name, 2
        while name in self._names:
            name = f"{base}#{k}"
            k += 1
        self._names.add(name)
        self.nodes.append(Node(name, kind, block))
        return name

    def connect(self, src, dst, gain=1.0):
        self.edges.append(Edge(src, dst, gain))

    def chain(self, elements, src, prefix):
        """Append a chain of blocks after ``src``; returns (last node, names)."""
        names = []
        for i, el in enumerate(elements):
            name, block = el if isinstance(el, tuple) else (f"{prefix}.{i}", el)
            if isinstance(block, RationalTF):
                kind = "linear"
            elif isinstance(block, StaticNL):
                kind = "nonlinear"
            else:
                raise GraphError(f"chain element {el!r} is not a block")
            name = self.node(name, kind, block)
            self.connect(src, name)
            names.append(name)
            src = name
        return src, tuple(names)

    def build(self, topology):
        return check_graph(BlockGraph(tuple(self.nodes), tuple(self.edges), topology,
                                      tuple(self.groups)))


def _named(block, name):
    return block if name is None else (name, block)


def single_branch(chain):
    """Cascade of blocks between input and output."""
    b = _Builder()
    u = b.node("u", "input")
    last, names = b.chain(chain, u, "b")
    y = b.node("y", "output")
    b.connect(last, y)
    b.groups.append(("ff", names))
    return b.build("single_branch")


def wiener(G, f):
    return single_branch([G, f])


def hammerstein(f, G):
    return single_branch([f, G])


def wiener_hammerstein(G1, f, G2):
    return single_branch([G1, f, G2])


def parallel_wh(branches):
    """Sum of two or more block chains fed by the same input."""
    if len(branches) < 2:
        raise GraphError("a parallel structure needs at least two branches")
    b = _Builder()
    u = b.node("u", "input")
    s = b.node("y_sum", "sum")
    for i, br in enumerate(branches):
        last, names = b.chain(br, u, f"ff{i}")
        b.connect(last, s)
        b.groups.append(("ff", names))
    b.connect(s, b.node("y", "output"))
    return b.build("parallel_ff")


def ff_fb_parallel(ff, fb):
    """Parallel feed-forward branches closed by parallel negative feedback.

    ``y = sum(ff_i(e))`` with ``e = r - sum(fb_j(y))``.
    """
    if len(ff) < 1 or len(fb) < 1:
        raise GraphError("need at least one feed-forward and one feedback branch")
    b = _Builder()
    u = b.node("u", "input")
    e = b.node("e", "sum")
    b.connect(u, e)
    ys = b.node("y_sum", "sum")
    for i, br in enumerate(ff):
        last, names = b.chain(br, e, f"ff{i}")
        b.connect(last, ys)
        b.groups.append(("ff", names))
    qs = b.node("q_sum", "sum")
    for j, br in enumerate(fb):
        last, names = b.chain(br, ys, f"fb{j}")
        b.connect(last, qs)
        b.groups.append(("fb", names))
    b.connect(qs, e, -1.0)
    b.connect(ys, b.node("y", "output"))
    return b.build("ff_fb_parallel")


def lfr(G1, G2, G3, f, G4=None, names=None):
    """Nonlinearity in a linear fractional frame.

    ``w = f(G1 r - G3 w)``, ``y = G2 w + G4 r``; an absent ``G4`` leaves the
    direct branch out entirely.
    """
    nm = dict(names or {})
    b = _Builder()
    u = b.node("u", "input")
    g1 = b.node(nm.get("g1", "G1"), "linear", G1)
    b.connect(u, g1)
    s = b.node("v", "sum")
    b.connect(g1, s)
    w = b.node(nm.get("nl", "f"), "nonlinear", f)
    b.connect(s, w)
    g3 = b.node(nm.get("g3", "G3"), "linear", G3)
    b.connect(w, g3)
    b.connect(g3, s, -1.0)
    g2 = b.node(nm.get("g2", "G2"), "linear", G2)
    b.connect(w, g2)
    ys = b.node("y_sum", "sum")
    b.connect(g2, ys)
    b.groups += [("g1", (g1,)), ("g2", (g2,)), ("g3", (g3,)), ("nl", (w,))]
    if G4 is not None:
        g4 = b.node(nm.get("g4", "G4"), "linear", G4)
        b.connect(u, g4)
        b.connect(g4, ys)
        b.groups.append(("g4", (g4,)))
    b.connect(ys, b.node("y", "output"))
    return b.build("lfr")


def symmetric_fffb(G1, G2, f=None, f1=None, f2=None, names=None):
    """Symmetric feed-forward/feedback structures.

    With one nonlinearity: ``y = G1 r + f(r - G2 y)``.
    With two: ``y = r + f1(G1 r) - f2(G2 y)``.
    """
    nm = dict(names or {})
    b = _Builder()
    u = b.node("u", "input")
    ys = b.node("y_sum", "sum")
    g1 = b.node(nm.get("g1", "G1"), "linear", G1)
    b.connect(u, g1)
    g2 = b.node(nm.get("g2", "G2"), "linear", G2)
    b.connect(ys, g2)
    b.groups += [("g1", (g1,)), ("g2", (g2,))]
    if f is not None and f1 is None and f2 is None:
        b.connect(g1, ys)
        es = b.node("e", "sum")
        b.connect(u, es)
        b.connect(g2, es, -1.0)
        n = b.node(nm.get("nl", "f"), "nonlinear", f)
        b.connect(es, n)
        b.connect(n, ys)
        b.groups.append(("nl", (n,)))
    elif f is None and f1 is not None and f2 is not None:
        b.connect(u, ys)
        n1 = b.node(nm.get("nl1", "f1"), "nonlinear", f1)
        b.connect(g1, n1)
        b.connect(n1, ys)
        n2 = b.node(nm.get("nl2", "f2"), "nonlinear", f2)
        b.connect(g2, n2)
        b.connect(n2, ys, -1.0)
        b.groups += [("nl1", (n1,)), ("nl2", (n2,))]
    else:
        raise GraphError("give either f, or both f1 and f2")
    b.connect(ys, b.node("y", "output"))
    return b.build("symmetric_fffb")


def custom(nodes, edges, groups=()):
    return check_graph(BlockGraph(tuple(nodes), tuple(edges), "custom", tuple(groups)))
