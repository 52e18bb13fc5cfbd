import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from blockloci.errors import GraphError, LinearizationError
from blockloci.linearize import branch_gain_matrix, linearize_graph, linearize_sweep, nl_slope
from blockloci.rootlocus import roots
from blockloci.systems import (RationalTF, StaticNL, lfr, parallel_wh, single_branch,
                               solve_setpoint, symmetric_fffb, wiener)
from conftest import F1, F2, F3, G1, G2, G3, ref_loop_graph

ABS = StaticNL.piecewise([0.0], [[0.0, -1.0], [0.0, 1.0]])
STEP = StaticNL.piecewise([0.0], [[0.0], [1.0]])


def _sorted(z):
    # origin roots come from the degree excess and are compared separately
    z = np.asarray(z, dtype=complex)
    z = z[np.abs(z) > 1e-8]
    return np.array(sorted(z, key=lambda c: (round(c.real, 9), c.imag)))


def test_slope_of_f1():
    assert nl_slope(F1, 1.0).eps_lin == pytest.approx(0.1, abs=1e-15)
    assert nl_slope(F1, 1.0).case == "iii"


def test_abs_is_case_ii():
    s = nl_slope(ABS, 0.0)
    assert s.case == "ii"
    assert s.eps_lin == 0.0
    assert not s.delta_exists
    assert s.to_dict()["delta_lin"] == "does not exist"


def test_step_is_case_i():
    s = nl_slope(STEP, 0.0)
    assert s.case == "i"
    assert math.isinf(s.eps_lin)


def _ref_loop_oracle(r, e0=0.0):
    """Closed-loop linearization in closed form, straight from the block
    polynomials (independent of the Cramer engine)."""
    from scipy.optimize import newton
    B1, A1, B2, A2 = [0.15, 0.1], [1, -0.9], [0.12, 0.11], [1, -0.77]
    B3, A3 = [0, 0.2, 0.15], [1, -0.72]
    d1 = lambda x: 1 - 0.9 * x ** 2
    d2 = lambda x: 1 + x + 1.5 * x ** 2
    d3 = lambda x: 1 + 0.4 * x + 2.4 * x ** 2
    f1 = lambda x: x - 0.3 * x ** 3
    f2 = lambda x: x + 0.5 * x ** 2 + 0.5 * x ** 3
    f3 = lambda x: x + 0.2 * x ** 2 + 0.8 * x ** 3
    e = e0
    for rr in np.linspace(0, r, 11)[1:] if r else [0.0]:
        e = newton(lambda e: e - rr + f3(1.25 * (f1(2.5 * e) + f2(e))), e, tol=1e-15)
    y = f1(2.5 * e) + f2(e)
    c1, c2, c3 = d1(2.5 * e), d2(e), d3(1.25 * y)
    nff = P.polyadd(c1 * P.polymul(B1, A2), c2 * P.polymul(B2, A1))
    num = P.polymul(nff, A3)
    den = P.polyadd(P.polymul(P.polymul(A1, A2), A3), c3 * P.polymul(nff, B3))
    # ascending powers of z^-1 -> roots in z from the reversed coefficients
    return np.roots(den), np.roots(num)


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0])
def test_ref_loop_matches_closed_form(ref_loop, r):
    m = linearize_graph(ref_loop, solve_setpoint(ref_loop, r))
    rs = roots(m.tf)
    p_ref, z_ref = _ref_loop_oracle(r)
    np.testing.assert_allclose(_sorted(rs.poles), _sorted(p_ref), atol=1e-9)
    np.testing.assert_allclose(_sorted(rs.zeros), _sorted(z_ref), atol=1e-9)


def test_ref_loop_frozen_roots(ref_loop):
    # values of the closed-form oracle, 4 decimals
    expect = {
        0.0: ([-0.0424, 0.7714 - 0.3871j, 0.7714 + 0.3871j, 0.8357], [-0.7828, 0.72, 0.8328]),
        1.0: ([-0.0784, 0.7544 - 0.5668j, 0.7544 + 0.5668j, 0.8429], [-0.7996, 0.72, 0.8415]),
    }
    for r, (p, z) in expect.items():
        rs = roots(linearize_graph(ref_loop, solve_setpoint(ref_loop, r)).tf)
        np.testing.assert_allclose(_sorted(rs.poles), _sorted(p), atol=6e-5)
        np.testing.assert_allclose(_sorted(rs.zeros), _sorted(z), atol=6e-5)


def test_ref_loop_fixed_zero_at_g3_pole(ref_loop):
    for m in linearize_sweep(ref_loop, np.linspace(0, 1, 11)):
        b = m.tf.full_num
        assert abs(P.polyval(1 / 0.72, b)) < 1e-12 * np.abs(b).sum() * 1.4 ** len(b)
        assert np.min(np.abs(roots(m.tf).zeros - 0.72)) < 1e-9


def test_ref_loop_frequency_response(ref_loop):
    op = solve_setpoint(ref_loop, 0.7)
    m = linearize_graph(ref_loop, op)
    s = {k: v.eps_lin for k, v in m.slopes.items()}
    f = np.linspace(0.01, 0.49, 37)
    nff = s["f1"] * G1.freqresp(f) + s["f2"] * G2.freqresp(f)
    ref = nff / (1 + nff * s["f3"] * G3.freqresp(f))
    np.testing.assert_allclose(m.freqresp(f), ref, rtol=1e-12)


def test_wiener_loci_constant_gain_varies():
    g = wiener(G1, F1)
    # the nonlinearity sees G1(1) r = 2.5 r, so r = 0.4 puts it at x = 1
    m0 = linearize_graph(g, solve_setpoint(g, 0.0))
    m1 = linearize_graph(g, solve_setpoint(g, 0.4))
    for m in (m0, m1):
        rs = roots(m.tf)
        np.testing.assert_allclose(rs.poles, [0.9], atol=1e-14)
        np.testing.assert_allclose(rs.zeros, [-2 / 3], atol=1e-14)
    assert m0.branch_gains["ff0"] == pytest.approx(1.0)
    assert m1.branch_gains["ff0"] == pytest.approx(0.1)


def test_parallel_poles_are_the_branch_poles():
    g = parallel_wh([[G1, F1], [G2, F2]])
    for m in linearize_sweep(g, [0.0, 0.3, 0.8]):
        np.testing.assert_allclose(np.sort(roots(m.tf).poles.real), [0.77, 0.9], atol=1e-12)


def test_lfr_formula():
    G4 = RationalTF((0.2, 0.1), (1.0, -0.4))
    Ga, Gb = RationalTF((0.5, 0.2), (1.0, -0.6)), RationalTF((0.3, 0.1), (1.0, -0.7))
    Gc = RationalTF((0.4, 0.2), (1.0, -0.5), delay=1)
    f = np.linspace(0.02, 0.48, 25)
    for g4 in (None, G4):
        g = lfr(Ga, Gb, Gc, F2, G4=g4)
        m = linearize_graph(g, solve_setpoint(g, 0.3))
        k = m.slopes["f"].eps_lin
        ref = Ga.freqresp(f) * Gb.freqresp(f) * k / (1 + k * Gc.freqresp(f))
        if g4 is not None:
            ref = ref + g4.freqresp(f)
        np.testing.assert_allclose(m.freqresp(f), ref, rtol=1e-12)


def test_symmetric_formulas():
    Ga, Gb = RationalTF((0.5, 0.2), (1.0, -0.6)), RationalTF((0.4, 0.1), (1.0, -0.5), delay=1)
    f = np.linspace(0.02, 0.48, 25)
    g = symmetric_fffb(Ga, Gb, f=F2)
    m = linearize_graph(g, solve_setpoint(g, 0.5))
    k = m.slopes["f"].eps_lin
    np.testing.assert_allclose(m.freqresp(f), (Ga.freqresp(f) + k) / (1 + k * Gb.freqresp(f)),
                               rtol=1e-12)
    g = symmetric_fffb(Ga, Gb, f1=F1, f2=F3)
    m = linearize_graph(g, solve_setpoint(g, 0.5))
    k1, k2 = m.slopes["f1"].eps_lin, m.slopes["f2"].eps_lin
    np.testing.assert_allclose(m.freqresp(f),
                               (1 + k1 * Ga.freqresp(f)) / (1 + k2 * Gb.freqresp(f)), rtol=1e-12)


def test_cancel_removes_common_factors():
    g = single_branch([RationalTF((1.0, -0.5), (1.0, -0.9)), F1, RationalTF((1.0,), (1.0, -0.5))])
    op = solve_setpoint(g, 0.2)
    full = roots(linearize_graph(g, op).tf)
    assert np.min(np.abs(full.zeros - 0.5)) < 1e-12
    cut = roots(linearize_graph(g, op, cancel=True).tf)
    np.testing.assert_allclose(cut.poles, [0.9], atol=1e-10)
    np.testing.assert_array_equal(cut.zeros, [0.0])  # degree excess only


def test_kink_handling():
    g = wiener(RationalTF((1.0,)), ABS)
    op = solve_setpoint(g, 0.0)
    with pytest.raises(LinearizationError, match="case ii"):
        linearize_graph(g, op)
    kink = StaticNL.piecewise([0.0], [[0.0, 1.0], [0.0, 2.0]])
    g = wiener(RationalTF((1.0,)), kink)
    m = linearize_graph(g, solve_setpoint(g, 0.0), strict=False)
    assert not m.delta_exists
    assert m.tf.num[0] == pytest.approx(1.5)
    g = wiener(RationalTF((1.0,)), STEP)
    with pytest.raises(LinearizationError, match="case i"):
        linearize_graph(g, solve_setpoint(g, 0.0), strict=False)


def test_branch_gain_matrix():
    g = parallel_wh([[G1, F1], [G2, F2]])
    B = branch_gain_matrix(g, [0.0, 1.0])
    np.testing.assert_allclose(B.values[0], [1.0, 1.0])
    np.testing.assert_allclose(B.values[1], [F1.derivative(2.5), F2.derivative(1.0)])
    lin = parallel_wh([[G1], [G2]])
    B = branch_gain_matrix(lin, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(B.values, 1.0)
    assert B.rank() == 1
    assert branch_gain_matrix(g, [0.3]).shape == (1, 2)
    with pytest.raises(GraphError):
        branch_gain_matrix(ref_loop_graph(), [0.0])


def test_to_dict_has_roots(ref_loop):
    d = linearize_graph(ref_loop, solve_setpoint(ref_loop, 0.2)).to_dict()
    # three finite zeros plus one at the origin (numerator one degree short)
    assert len(d["poles"]) == 4 and len(d["zeros"]) == 4
    assert d["zeros"][1] == [0.0, 0.0]
    assert d["delta_linearization"] == "exists"
