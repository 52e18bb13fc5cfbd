import numpy as np
import pytest
from scipy.optimize import newton

from blockloci.errors import GraphError, UnstableTrajectoryError
from blockloci.signals import Signal
from blockloci.systems import (BlockGraph, Edge, Node, RationalTF, StaticNL, available_backends,
                               build_wiener, custom, ff_fb_parallel, get_backend, hammerstein,
                               lfr, set_backend, simulate, single_branch, solve_setpoint,
                               sweep_setpoints, symmetric_fffb, validate_graph)
from conftest import F1, F2, F3, G1, G2, G3, ref_loop_graph


def test_ref_loop_graph_is_valid(ref_loop):
    assert validate_graph(ref_loop) == []
    assert ref_loop.topology == "ff_fb_parallel"
    assert [n.name for n in ref_loop.nonlinear_blocks()] == ["f1", "f2", "f3"]


def test_algebraic_loop_is_reported():
    g3 = RationalTF(G3.num, G3.den, delay=0)
    with pytest.raises(GraphError, match="algebraic"):
        ref_loop_graph(g3=g3)
    b = ref_loop_graph()
    nodes = tuple(Node(n.name, n.kind, g3 if n.name == "G3" else n.block) for n in b.nodes)
    bad = [v for v in validate_graph(BlockGraph(nodes, b.edges, b.topology, b.groups))
           if v.code == "algebraic_loop"]
    assert bad and "G3" in str(bad[0])


def test_other_violations():
    u, y = Node("u", "input"), Node("y", "output")
    g = Node("g", "linear", RationalTF((1.0,), (1.0, -1.5)))
    codes = {v.code for v in validate_graph(BlockGraph((u, g, y), (Edge("u", "g"), Edge("g", "y"))))}
    assert "unstable" in codes
    codes = {v.code for v in validate_graph(BlockGraph((u, y), (Edge("u", "z"),)))}
    assert codes == {"edge"}
    lone = Node("h", "linear", RationalTF((1.0,)))
    codes = {v.code for v in validate_graph(
        BlockGraph((u, g, lone, y), (Edge("u", "y"), Edge("u", "h"))))}
    assert {"disconnected", "degree"} <= codes


def test_wiener_is_a_chain():
    g = build_wiener(G1, F1)
    assert [n.kind for n in g.nodes] == ["input", "linear", "nonlinear", "output"]
    assert len(g.edges) == 3
    assert validate_graph(g) == []


def test_lfr_without_g4_has_no_direct_branch():
    g = lfr(G1, G2, G3, F1)
    assert "g4" not in dict(g.groups)
    g4 = lfr(G1, G2, G3, F1, G4=RationalTF((0.2,), (1.0, -0.4)))
    assert "g4" in dict(g4.groups)


def test_symmetric_needs_consistent_nonlinearities():
    with pytest.raises(GraphError):
        symmetric_fffb(G1, G3, f=F1, f1=F2)
    g = symmetric_fffb(G1, G3, f1=F1, f2=F2)
    assert len(g.nonlinear_blocks()) == 2


def test_dict_round_trip(ref_loop):
    again = BlockGraph.from_dict(ref_loop.to_dict())
    assert again == ref_loop


def test_hammerstein_dc():
    g = hammerstein(StaticNL.polynomial([0, 0, 1]), RationalTF((1.0,), (1.0, -0.5)))
    assert solve_setpoint(g, 0.5).y_dc == pytest.approx(0.5, abs=1e-12)


def test_linear_loop_dc():
    g = ff_fb_parallel([[RationalTF.gain(2.0)]], [[RationalTF((1.0,), delay=1)]])
    assert solve_setpoint(g, 1.5).y_dc == pytest.approx(1.0, abs=1e-12)


def test_odd_system_at_zero():
    odd = lambda f: StaticNL.polynomial([c if i % 2 else 0.0 for i, c in enumerate(f.pieces[0])])
    g = ref_loop_graph(f1=odd(F1), f2=odd(F2), f3=odd(F3))
    assert solve_setpoint(g, 0.0).y_dc == 0.0


def _ref_loop_dc_oracle(r_values):
    # scalar error equation, continued from e = 0 (independent of the graph code)
    g1, g2, g3 = 2.5, 1.0, 1.25
    f1, f2, f3 = (lambda x: x - 0.3 * x ** 3, lambda x: x + 0.5 * x ** 2 + 0.5 * x ** 3,
                  lambda x: x + 0.2 * x ** 2 + 0.8 * x ** 3)
    e, out = 0.0, []
    for r in r_values:
        e = newton(lambda e: e - r + f3(g3 * (f1(g1 * e) + f2(g2 * e))), e, tol=1e-14)
        out.append(f1(g1 * e) + f2(g2 * e))
    return np.array(out)


def test_ref_loop_continuation_finds_the_physical_branch(ref_loop):
    sps = np.linspace(0, 1, 11)
    ys = [op.y_dc for op in sweep_setpoints(ref_loop, sps)]
    np.testing.assert_allclose(ys, _ref_loop_dc_oracle(sps), atol=1e-10)
    # a cold solve at r=1 must land on the same branch
    assert solve_setpoint(ref_loop, 1.0).y_dc == pytest.approx(ys[-1], abs=1e-10)


def test_impulse_response_of_G1():
    g = single_branch([G1])
    u = np.zeros(10)
    u[0] = 1.0
    y = simulate(g, Signal(u), warmup=0).samples
    np.testing.assert_allclose(y[:3], [0.15, 0.235, 0.2115], atol=1e-15)
    np.testing.assert_allclose(y[3:], 0.2115 * 0.9 ** np.arange(1, 8), rtol=1e-12)


def test_static_graph_output():
    g = single_branch([F2])
    y = simulate(g, Signal(np.ones(5), dc=1.0), warmup=0)
    np.testing.assert_allclose(y.samples, 2.0)


def test_zero_ac_stays_at_operating_point(ref_loop):
    op = solve_setpoint(ref_loop, 0.6)
    y = simulate(ref_loop, Signal(np.full(300, 0.6), dc=0.6), warmup=0, op=op)
    np.testing.assert_allclose(y.samples, op.y_dc, atol=1e-12)


@pytest.mark.skipif("cython" not in available_backends(), reason="compiled kernel not built")
def test_backends_agree(ref_loop):
    rng = np.random.default_rng(0)
    u = Signal(0.4 + 0.05 * rng.standard_normal(2000), dc=0.4)
    prev = get_backend()
    try:
        set_backend("python")
        yp = simulate(ref_loop, u, warmup=100).samples
        set_backend("cython")
        yc = simulate(ref_loop, u, warmup=100).samples
    finally:
        set_backend(prev)
    np.testing.assert_array_equal(yp, yc)


def test_unstable_loop_raises():
    g = ff_fb_parallel([[StaticNL.polynomial([0, 1, 0, 1])]], [[RationalTF((0.9,), delay=1)]])
    u = Signal(1.0 + 0.01 * np.sin(np.arange(500)), dc=1.0)
    with pytest.raises(UnstableTrajectoryError) as info:
        simulate(g, u, warmup=0)
    assert info.value.sample is not None


def test_custom_graph_requires_validity():
    with pytest.raises(GraphError):
        custom([Node("u", "input")], [])
