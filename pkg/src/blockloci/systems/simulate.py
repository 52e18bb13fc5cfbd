"""Time-domain simulation of block graphs.

The graph is flattened once into integer/float arrays (:class:`Program`)
that a per-sample kernel walks. The compiled Cython kernel is used when it
was built; otherwise, or when ``BLOCKLOCI_BACKEND=python`` is set, the
pure-Python kernel runs the identical recursion.
"""
import functools
import math
import os
from dataclasses import dataclass

import numpy as np

from .. import _poly
from ..errors import UnstableTrajectoryError
from ..signals import Signal, periodic_extend
from . import _kernel_py
from .graph import check_graph, evaluation_order
from .setpoint import solve_setpoint

try:
    from . import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None

OVERFLOW_GUARD = 1e9
MAX_WARMUP = 100_000
TRANSIENT_DECAY = 1e-16

_KINDS = {"input": 0, "sum": 1, "nonlinear": 2, "linear": 3, "output": 4}
_backend = "cython" if (_kernel_c is not None and
                        os.environ.get("BLOCKLOCI_BACKEND", "").lower() != "python") else "python"


def available_backends():
    return ("cython", "python") if _kernel_c is not None else ("python",)


def get_backend():
    return _backend


def set_backend(name):
    """Select ``"cython"`` or ``"python"``; returns the previous choice."""
    global _backend
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    prev, _backend = _backend, name
    return prev


def _kernel():
    return _kernel_c if _backend == "cython" else _kernel_py


@dataclass(frozen=True, eq=False)
class Program:
    names: tuple
    order: np.ndarray
    kind: np.ndarray
    in_ptr: np.ndarray
    in_src: np.ndarray
    in_gain: np.ndarray
    lin_nodes: np.ndarray
    lin_direct: np.ndarray
    b_ptr: np.ndarray
    nbc: np.ndarray
    b_all: np.ndarray
    a_ptr: np.ndarray
    nac: np.ndarray
    a_all: np.ndarray
    xs_ptr: np.ndarray
    ys_ptr: np.ndarray
    bp_ptr: np.ndarray
    nbp: np.ndarray
    bp_all: np.ndarray
    coef_ptr: np.ndarray
    ncoef: np.ndarray
    coef_all: np.ndarray
    output: int
    n_xstate: int
    n_ystate: int

    def scratch(self):
        return np.zeros(len(self.names))

    def initial_state(self, op):
        """Filter states holding the operating point's DC values."""
        xs = np.zeros(self.n_xstate)
        ys = np.zeros(self.n_ystate)
        for n in self.lin_nodes:
            name = self.names[n]
            xs[self.xs_ptr[n]:self.xs_ptr[n] + self.nbc[n]] = op.node_in_dc[name]
            ys[self.ys_ptr[n]:self.ys_ptr[n] + self.nac[n]] = op.node_dc[name]
        return xs, ys


@functools.lru_cache(maxsize=64)
def compile_graph(graph):
    """Flatten ``graph`` into the array program consumed by the kernels."""
    check_graph(graph)
    names = tuple(n.name for n in graph.nodes)
    idx = {nm: i for i, nm in enumerate(names)}
    nn = len(names)
    i32 = lambda x: np.asarray(x, dtype=np.int32)
    f64 = lambda x: np.asarray(x, dtype=float)

    in_ptr, in_src, in_gain = [0], [], []
    for nm in names:
        for e in graph.incoming(nm):
            in_src.append(idx[e.src])
            in_gain.append(e.gain)
        in_ptr.append(len(in_src))

    zeros = lambda: [0] * nn
    lin_direct, b_ptr, nbc, a_ptr, nac, xs_ptr, ys_ptr = (zeros() for _ in range(7))
    bp_ptr, nbp, coef_ptr, ncoef = (zeros() for _ in range(4))
    b_all, a_all, bp_all, coef_all = [], [], [], []
    lin_nodes = []
    nx = ny = 0
    for i, node in enumerate(graph.nodes):
        if node.kind == "linear":
            tf = node.block
            b = tf.full_num
            lin_nodes.append(i)
            lin_direct[i] = int(b[0] != 0.0)
            b_ptr[i], nbc[i] = len(b_all), len(b)
            b_all.extend(b)
            a_ptr[i], nac[i] = len(a_all), tf.na
            a_all.extend(tf.den[1:])
            xs_ptr[i], ys_ptr[i] = nx, ny
            nx += len(b)
            ny += tf.na
        elif node.kind == "nonlinear":
            nl = node.block
            m = nl.degree + 1
            bp_ptr[i], nbp[i] = len(bp_all), len(nl.breakpoints)
            bp_all.extend(nl.breakpoints)
            coef_ptr[i], ncoef[i] = len(coef_all), m
            for p in nl.pieces:
                coef_all.extend(list(p) + [0.0] * (m - len(p)))

    return Program(
        names=names,
        order=i32([idx[nm] for nm in evaluation_order(graph)]),
        kind=i32([_KINDS[n.kind] for n in graph.nodes]),
        in_ptr=i32(in_ptr), in_src=i32(in_src), in_gain=f64(in_gain),
        lin_nodes=i32(lin_nodes), lin_direct=i32(lin_direct),
        b_ptr=i32(b_ptr), nbc=i32(nbc), b_all=f64(b_all),
        a_ptr=i32(a_ptr), nac=i32(nac), a_all=f64(a_all),
        xs_ptr=i32(xs_ptr), ys_ptr=i32(ys_ptr),
        bp_ptr=i32(bp_ptr), nbp=i32(nbp), bp_all=f64(bp_all),
        coef_ptr=i32(coef_ptr), ncoef=i32(ncoef), coef_all=f64(coef_all),
        output=idx[graph.output], n_xstate=nx, n_ystate=ny,
    )


def run_program(prog, u, xstate, ystate, guard=OVERFLOW_GUARD):
    """Run the selected kernel; returns (output, failing sample or -1)."""
    u = np.ascontiguousarray(u, dtype=float)
    y = np.zeros(len(u))
    failed = _kernel().run(prog, u, y, xstate, ystate, float(guard))
    return y, int(failed)


def slowest_pole(graph, op=None):
    """Largest pole magnitude over the blocks and, when available, the
    linearized interconnection at ``op``."""
    mags = [np.max(np.abs(n.block.poles())) for n in graph.linear_blocks() if n.block.na]
    if op is not None and graph.has_cycle():
        from ..linearize import linearize_graph
        from ..errors import LinearizationError
        try:
            lin = linearize_graph(graph, op)
        except LinearizationError:
            pass
        else:
            p = _poly.companion_roots(np.asarray(lin.tf.den))
            if p.size:
                mags.append(np.max(np.abs(p)))
    return max(mags, default=0.0)


def default_warmup(graph, op=None):
    """Samples for the slowest mode to decay by ``TRANSIENT_DECAY``
    (``log(decay) / log(max|pole|)``), at least 10 and at most 1e5."""
    pmax = slowest_pole(graph, op)
    if pmax >= 1.0:
        return MAX_WARMUP
    if pmax <= 0.0:
        return 10
    n = math.ceil(math.log(TRANSIENT_DECAY) / math.log(pmax))
    return int(min(MAX_WARMUP, max(10, n)))


def simulate(graph, signal, warmup=None, periodic=False, op=None,
             guard=OVERFLOW_GUARD):
    """Simulate ``graph`` driven by ``signal``.

    Filter states start at the DC operating point of ``signal.dc``.

    Parameters
    ----------
    graph : BlockGraph
    signal : Signal
    warmup : int, optional
        Samples discarded before the returned record. Defaults to
        :func:`default_warmup`.
    periodic : bool
        Treat ``signal`` as one period: ``warmup`` samples of its cyclic
        continuation are prepended, and the returned record has the same
        length as the input. Otherwise the first ``warmup`` outputs of the
        given record are dropped.
    op : OperatingPoint, optional
        Precomputed operating point for ``signal.dc``.

    Raises
    ------
    UnstableTrajectoryError
        If any node value exceeds ``guard`` in magnitude.
    """
    prog = compile_graph(graph)
    if op is None:
        op = solve_setpoint(graph, signal.dc)
    if warmup is None:
        warmup = default_warmup(graph, op)
    if warmup < 0:
        raise ValueError("warmup must be nonnegative")
    u = periodic_extend(signal.samples, warmup) if periodic else signal.samples
    if not periodic and warmup >= len(u):
        raise ValueError("warmup consumes the whole record")
    xs, ys = prog.initial_state(op)
    y, failed = run_program(prog, u, xs, ys, guard)
    if failed >= 0:
        raise UnstableTrajectoryError(
            f"unstable trajectory at sample {failed} around r_dc={signal.dc:g}: "
            f"|signal| exceeded {guard:g}", sample=failed)
    y = y[warmup:]
    return Signal(y, float(op.y_dc), float(np.std(y)), signal.class_tag)
