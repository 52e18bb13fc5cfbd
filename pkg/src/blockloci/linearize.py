"""Analytic small-signal linearization of block graphs.

Each static nonlinearity is replaced by its local slope at the operating
point. The resulting linear network is written as a polynomial system
``P(z^-1) x = e_u u`` with one unknown per node, and the input-to-output
transfer function follows from Cramer's rule,

    G = det(P with the output column replaced by e_u) / det(P).

Determinants are expanded exactly with polynomial arithmetic, so the result
keeps the natural uncancelled form: cascades multiply numerators and
denominators, parallel branches share a common denominator, and closed
loops give ``A_ff A_fb + loop numerator``. This is what makes feedback
poles visible as fixed zeros.
"""
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import _poly
from .errors import GraphError, LinearizationError
from .systems.blocks import RationalTF
from .systems.setpoint import sweep_setpoints

JUMP_RTOL = 1e-12
CANCEL_TOL = 1e-10


@dataclass(frozen=True)
class LocalSlope:
    """Left/right derivatives of a nonlinearity and its linearizations.

    ``case`` follows the smoothness taxonomy: ``"i"`` value jump (the
    eps-linearization is infinite), ``"ii"`` derivative jump (it is the mean
    of the one-sided slopes, and no delta-linearization exists), ``"iii"``
    differentiable.
    """

    left: float
    right: float
    eps_lin: float
    delta_lin: Optional[float]
    case: str

    @property
    def delta_exists(self):
        return self.delta_lin is not None

    def to_dict(self):
        return {"left": self.left, "right": self.right,
                "eps_lin": "infinite" if math.isinf(self.eps_lin) else self.eps_lin,
                "delta_lin": "does not exist" if self.delta_lin is None else self.delta_lin,
                "case": self.case}


def nl_slope(nl, u_dc):
    """Classify ``nl`` at ``u_dc`` and return its local slopes."""
    fl, fr, dl, dr = nl.one_sided(float(u_dc))
    if abs(fr - fl) > JUMP_RTOL * (1.0 + abs(fl) + abs(fr)):
        return LocalSlope(dl, dr, math.inf, None, "i")
    if abs(dr - dl) > JUMP_RTOL * (1.0 + abs(dl) + abs(dr)):
        return LocalSlope(dl, dr, 0.5 * (dl + dr), None, "ii")
    return LocalSlope(dl, dr, dl, dl, "iii")


@dataclass(frozen=True)
class LinearizedModel:
    """Exact linearization ``tf`` of a graph at ``setpoint``."""

    tf: RationalTF
    branch_gains: Mapping[str, float]
    slopes: Mapping[str, LocalSlope]
    setpoint: object = field(repr=False)
    delta_exists: bool = True

    def freqresp(self, f):
        return self.tf.freqresp(f)

    def to_dict(self):
        from .rootlocus import roots
        rs = roots(self.tf)
        return {
            "r_dc": self.setpoint.r_dc,
            "num": list(self.tf.num), "den": list(self.tf.den), "delay": self.tf.delay,
            "poles": [[z.real, z.imag] for z in rs.poles],
            "zeros": [[z.real, z.imag] for z in rs.zeros],
            "branch_gains": dict(self.branch_gains),
            "slopes": {k: v.to_dict() for k, v in self.slopes.items()},
            "delta_linearization": "exists" if self.delta_exists else "does not exist",
        }


def _det(P, rows, ncols):
    """Determinant of a sparse polynomial matrix by memoized Laplace
    expansion along rows. ``P`` maps (row, col) to a coefficient array."""
    by_row = [sorted(c for (r, c) in P if r == i) for i in rows]
    memo = {}

    def rec(i, used):
        if i == len(rows):
            return np.ones(1)
        key = (i, used)
        if key in memo:
            return memo[key]
        acc = np.zeros(1)
        for c in by_row[i]:
            if used >> c & 1:
                continue
            sub = rec(i + 1, used | (1 << c))
            if not np.any(sub):
                continue
            # sign = (-1)^(number of still-free columns left of c)
            free_left = sum(1 for k in range(c) if not used >> k & 1)
            term = _poly.pmul(P[(rows[i], c)], sub)
            acc = _poly.padd(acc, -term if free_left % 2 else term)
        memo[key] = acc
        return acc

    return rec(0, 0)


def _system_matrix(graph, slope_of):
    names = [n.name for n in graph.nodes]
    idx = {nm: i for i, nm in enumerate(names)}
    P = {}

    def add(r, c, poly):
        P[(r, c)] = _poly.padd(P.get((r, c), np.zeros(1)), np.asarray(poly, dtype=float))

    for node in graph.nodes:
        j = idx[node.name]
        if node.kind == "input":
            add(j, j, [1.0])
            continue
        if node.kind == "linear":
            add(j, j, node.block.den)
            feed = node.block.full_num
        elif node.kind == "nonlinear":
            add(j, j, [1.0])
            feed = np.array([slope_of[node.name]])
        else:
            add(j, j, [1.0])
            feed = np.array([1.0])
        for e in graph.incoming(node.name):
            add(j, idx[e.src], -e.gain * feed)
    P = {k: v for k, v in P.items() if np.any(v)}
    return P, idx


def _cancel_common(num, den, tol=CANCEL_TOL):
    """Remove root pairs shared by ``num`` and ``den`` (within ``tol``)."""
    d = _poly.leading_zeros(num)
    b = num[d:]
    zs = list(_poly.companion_roots(b)) if len(b) > 1 else []
    ps = list(_poly.companion_roots(den)) if len(den) > 1 else []
    keep_z = []
    for z in zs:
        hit = next((k for k, p in enumerate(ps) if abs(p - z) < tol), None)
        if hit is None:
            keep_z.append(z)
        else:
            ps.pop(hit)
    new_b = b[0] * np.real_if_close(_poly.from_roots(keep_z), tol=1e6)
    new_a = np.real_if_close(_poly.from_roots(ps), tol=1e6)
    return _poly.shift(np.real(new_b), d), np.real(new_a)


def _branch_gains(graph, slope_of):
    gains, counts = {}, {}
    for label, names in graph.groups:
        nls = [n for n in names if graph.node(n).kind == "nonlinear"]
        if label in ("ff", "fb"):
            key = f"{label}{counts.get(label, 0)}"
            counts[label] = counts.get(label, 0) + 1
        elif nls:
            key = label
        else:
            continue
        gains[key] = float(np.prod([slope_of[n] for n in nls])) if nls else 1.0
    return gains


def linearize_graph(graph, op, cancel=False, strict=True):
    """Compose the exact small-signal transfer function at ``op``.

    Parameters
    ----------
    graph : BlockGraph
    op : OperatingPoint
        Converged DC solution of ``graph``.
    cancel : bool
        Cancel numerator/denominator roots that coincide within 1e-10.
        Off by default: uncancelled factors carry structural information.
    strict : bool
        Require every nonlinearity to be differentiable at its operating
        point. With ``strict=False`` a derivative jump is linearized by the
        mean of its one-sided slopes and the delta-linearization is marked
        nonexistent. A value jump always raises.

    Returns
    -------
    LinearizedModel

    Raises
    ------
    LinearizationError
        Non-converged operating point, a nonlinearity that is not
        differentiable at its operating point, a vanishing linearization,
        or an instantaneous loop gain that makes the model improper.
    """
    if not op.converged:
        raise LinearizationError(f"operating point at r_dc={op.r_dc:g} did not converge")
    slopes, slope_of = {}, {}
    for node in graph.nonlinear_blocks():
        s = nl_slope(node.block, op.node_in_dc[node.name])
        if s.case == "i" or (strict and s.case == "ii"):
            raise LinearizationError(
                f"nonlinearity {node.name!r} is not differentiable at its operating "
                f"point {op.node_in_dc[node.name]:g} (case {s.case})")
        slopes[node.name] = s
        slope_of[node.name] = s.eps_lin

    P, idx = _system_matrix(graph, slope_of)
    n = len(idx)
    rows = list(range(n))
    den = _det(P, rows, n)
    out, inp = idx[graph.output], idx[graph.input]
    Pn = {k: v for k, v in P.items() if k[1] != out}
    Pn[(inp, out)] = np.ones(1)
    num = _det(Pn, rows, n)

    den, num = _poly.trim(den), _poly.trim(num)
    if not np.any(num):
        raise LinearizationError(f"linearization vanishes at r_dc={op.r_dc:g}")
    if den[0] == 0.0:
        raise LinearizationError("linearized loop is improper (instantaneous loop gain)")
    num, den = num / den[0], den / den[0]
    if cancel:
        num, den = _cancel_common(num, den)
    d = _poly.leading_zeros(num)
    tf = RationalTF(num[d:], den, delay=d)
    return LinearizedModel(tf, _branch_gains(graph, slope_of), slopes, op,
                           all(s.delta_exists for s in slopes.values()))


def linearize_sweep(graph, setpoints, cancel=False, strict=True):
    """Linearizations along a setpoint sweep (continuation-solved DC)."""
    return [linearize_graph(graph, op, cancel, strict)
            for op in sweep_setpoints(graph, setpoints)]


@dataclass(frozen=True)
class BranchGainMatrix:
    """Rows are setpoints, columns branches; entry = product of the
    nonlinearity slopes along the branch at that setpoint."""

    setpoints: tuple
    branches: tuple
    values: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.values.shape

    def rank(self, rtol=1e-10):
        return int(np.linalg.matrix_rank(self.values, tol=rtol * max(1.0, np.abs(self.values).max())))


def branch_gain_matrix(graph, setpoints):
    """Branch-gain matrix of a parallel feed-forward graph."""
    if graph.topology not in ("parallel_ff", "single_branch"):
        raise GraphError(f"branch gains need a parallel feed-forward graph, "
                         f"got topology {graph.topology!r}")
    models = linearize_sweep(graph, setpoints)
    branches = tuple(models[0].branch_gains)
    vals = np.array([[m.branch_gains[b] for b in branches] for m in models])
    return BranchGainMatrix(tuple(float(r) for r in setpoints), branches, vals)


__all__ = ["LocalSlope", "nl_slope", "LinearizedModel", "linearize_graph",
           "linearize_sweep", "BranchGainMatrix", "branch_gain_matrix"]
