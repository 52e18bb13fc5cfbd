"""DC operating points of block graphs.

At DC every linear block reduces to its gain ``B(1)/A(1)`` and every
nonlinearity to pointwise evaluation. Open-loop graphs are evaluated in one
topological pass. Graphs with feedback are torn at their delayed linear
blocks and the tear values are found by Newton iteration with a Jacobian
built from analytic slopes, falling back to damped fixed-point steps.
"""
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ..errors import ConvergenceError, GraphError
from .graph import evaluation_order, full_order

MAX_ITER = 200
TOL = 1e-12
CONTINUATION_STEP = 0.1


@dataclass(frozen=True)
class OperatingPoint:
    """DC solution at input setpoint ``r_dc``.

    ``node_dc`` holds every node's DC output and ``node_in_dc`` the DC value
    arriving at its input (what a nonlinearity is linearized around).
    """

    r_dc: float
    node_dc: Mapping[str, float]
    node_in_dc: Mapping[str, float]
    y_dc: float
    converged: bool
    residual: float
    iterations: int = 0

    def to_dict(self):
        return {"r_dc": self.r_dc, "y_dc": self.y_dc, "converged": self.converged,
                "residual": self.residual, "iterations": self.iterations,
                "node_dc": dict(self.node_dc), "node_in_dc": dict(self.node_in_dc)}


def _dc_gain(block, name):
    try:
        return block.dc_gain()
    except ZeroDivisionError:
        raise GraphError(f"DC gain of block {name!r} is undefined (A(1) = 0)") from None


def _input_value(graph, name, values):
    return sum(e.gain * values[e.src] for e in graph.incoming(name))


def _propagate(graph, order, r_dc, torn, gains):
    """One DC pass with the torn blocks' outputs held at ``torn``.

    Returns node values, node input values, and per-node derivative rows
    with respect to the torn values.
    """
    k = len(torn)
    names = list(torn)
    val, inval, dval = {}, {}, {}
    for name in order:
        node = graph.node(name)
        if node.kind == "input":
            val[name], dval[name] = r_dc, np.zeros(k)
            continue
        if name in torn:
            val[name] = torn[name]
            d = np.zeros(k)
            d[names.index(name)] = 1.0
            dval[name] = d
            continue
        x = _input_value(graph, name, val)
        dx = sum((e.gain * dval[e.src] for e in graph.incoming(name)), np.zeros(k))
        inval[name] = x
        if node.kind == "linear":
            val[name], dval[name] = gains[name] * x, gains[name] * dx
        elif node.kind == "nonlinear":
            val[name] = float(node.block(x))
            dval[name] = float(node.block.derivative(x)) * dx
        else:
            val[name], dval[name] = x, dx
    for name in torn:
        inval[name] = _input_value(graph, name, val)
    val = {k: float(v) for k, v in val.items()}
    inval = {k: float(v) for k, v in inval.items()}
    return val, inval, dval


def solve_setpoint(graph, r_dc, x0=None, x0_r=None, max_iter=MAX_ITER, tol=TOL):
    """Solve the DC operating point for input level ``r_dc``.

    Parameters
    ----------
    graph : BlockGraph
    r_dc : float
    x0 : mapping, optional
        Starting guesses for the torn blocks' DC outputs, e.g. the solution
        at a neighbouring setpoint.
    x0_r : float, optional
        Setpoint at which ``x0`` was solved. Loops are solved by
        continuation from ``(x0_r, x0)``, or from the rest state at
        ``r_dc = 0`` when no guess is given, in steps of at most 0.1.

    Returns
    -------
    OperatingPoint

    Raises
    ------
    ConvergenceError
        When neither Newton nor damped fixed-point iteration reaches ``tol``.
    """
    r_dc = float(r_dc)
    gains = {n.name: _dc_gain(n.block, n.name) for n in graph.linear_blocks()}
    try:
        order = full_order(graph)
    except GraphError:
        order = None
    if order is not None:
        val, inval, _ = _propagate(graph, order, r_dc, {}, gains)
        return OperatingPoint(r_dc, MappingProxyType(val), MappingProxyType(inval),
                              val[graph.output], True, 0.0, 0)

    order = evaluation_order(graph)
    torn_names = [n.name for n in graph.linear_blocks() if n.block.effective_delay >= 1]
    # Loops can have several equilibria; walk from a known state (the rest
    # state at r = 0 by default) so the branch reached stays connected to it.
    if x0 is None:
        x, r0 = np.zeros(len(torn_names)), 0.0
    else:
        x = np.array([float(x0.get(n, 0.0)) for n in torn_names])
        r0 = r_dc if x0_r is None else float(x0_r)
    steps = max(1, int(np.ceil(abs(r_dc - r0) / CONTINUATION_STEP - 1e-9)))
    for r in np.linspace(r0, r_dc, steps + 1)[1:]:
        op = _newton(graph, order, float(r), torn_names, gains, x, max_iter, tol)
        x = np.array([op.node_dc[n] for n in torn_names])
    return op


def _newton(graph, order, r_dc, torn_names, gains, x, max_iter, tol):
    def residual(x):
        torn = dict(zip(torn_names, x))
        val, inval, dval = _propagate(graph, order, r_dc, torn, gains)
        phi = np.array([gains[n] * inval[n] for n in torn_names])
        jac = np.array([gains[n] * sum((e.gain * dval[e.src] for e in graph.incoming(n)),
                                        np.zeros(len(x))) for n in torn_names])
        return phi - x, jac - np.eye(len(x)), (val, inval)

    res, jac, state = residual(x)
    norm = np.max(np.abs(res))
    it = 0
    while norm >= tol and it < max_iter:
        it += 1
        try:
            step = -np.linalg.solve(jac, res)
        except np.linalg.LinAlgError:
            step = 0.5 * res
        lam, accepted = 1.0, False
        while lam > 1e-6:
            xn = x + lam * step
            rn, jn, sn = residual(xn)
            nn = np.max(np.abs(rn))
            if np.isfinite(nn) and nn < norm:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            # damped fixed-point fallback
            xn = x + 0.5 * res
            rn, jn, sn = residual(xn)
            nn = np.max(np.abs(rn))
        x, res, jac, state, norm = xn, rn, jn, sn, nn
        if not np.isfinite(norm):
            break
    if not (norm < tol):
        raise ConvergenceError(
            f"DC operating point at r_dc={r_dc:g} did not converge "
            f"(residual {norm:.3g} after {it} iterations)")
    val, inval = state
    return OperatingPoint(r_dc, MappingProxyType(val), MappingProxyType(inval),
                          val[graph.output], True, float(norm), it)


def sweep_setpoints(graph, setpoints):
    """Operating points along a sweep, each seeded with its predecessor."""
    ops, prev, prev_r = [], None, None
    for r in setpoints:
        op = solve_setpoint(graph, r, x0=prev, x0_r=prev_r)
        prev_r = op.r_dc
        prev = {n.name: op.node_dc[n.name] for n in graph.linear_blocks()}
        ops.append(op)
    return ops
