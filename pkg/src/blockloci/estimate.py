"""Best-linear-approximation estimation.

Nonparametric FRFs averaged over excitation realizations, the static
Bussgang gain, and rational model fitting in the frequency domain
(Sanathanan-Koerner iterations refined by Levenberg-Marquardt on the
output-error cost).
"""
import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _poly
from .errors import FitError, SetpointError
from .signals import (MultisineSpec, PowerSpectrum, Signal, generate_gaussian,
                      generate_multisine, scale_to_class)
from .systems.blocks import RationalTF
from .systems.setpoint import solve_setpoint
from .systems.simulate import default_warmup, simulate

MIN_INPUT = 1e-12
VAR_FLOOR = 1e-12
MAX_ITER = 100
RTOL = 1e-10


@dataclass(frozen=True)
class FrfEstimate:
    """FRF at the excited bins of an ``N``-point record.

    ``var_G`` is the sample variance of the per-realization ratios
    ``Y_k / U_k`` and ``y_s_level`` the matching noncoherent output power;
    both are ``None`` when fewer than two realizations were averaged.
    """

    bins: np.ndarray
    N: int
    G_hat: np.ndarray = field(repr=False)
    var_G: Optional[np.ndarray] = field(default=None, repr=False)
    M: int = 1
    y_s_level: Optional[np.ndarray] = field(default=None, repr=False)
    source: str = "empirical"

    @property
    def freqs(self):
        return np.asarray(self.bins) / self.N

    @property
    def has_variance(self):
        return self.var_G is not None

    @classmethod
    def from_model(cls, tf, bins, N):
        """Exact FRF of ``tf`` at ``bins``; its variance is zero."""
        bins = np.asarray(bins, dtype=int)
        G = np.asarray(tf.freqresp(bins / N))
        return cls(bins, int(N), G, np.zeros(len(bins)), 1, np.zeros(len(bins)), "analytic")

    def to_csv(self, path, setpoint=None):
        write_frf_csv(path, [(setpoint, self)])


def _spectra(records):
    N = len(records[0][0])
    U, Y = [], []
    for u, y in records:
        u = np.asarray(getattr(u, "samples", u), dtype=float)
        y = np.asarray(getattr(y, "samples", y), dtype=float)
        if len(u) != N or len(y) != N:
            raise ValueError("all input and output records must have the same length")
        U.append(np.fft.fft(u - u.mean()) / N)
        Y.append(np.fft.fft(y - y.mean()) / N)
    return N, np.array(U), np.array(Y)


def estimate_frf(records, bins):
    """Average ``Y_k / U_k`` over realizations at the requested bins.

    Parameters
    ----------
    records : sequence of (Signal, Signal)
        Steady-state input/output periods, one pair per realization.
    bins : array_like of int
        Excited DFT bins.

    Returns
    -------
    FrfEstimate

    Raises
    ------
    ValueError
        On mismatched record lengths or an input with ``|U_k| < 1e-12``
        at a requested bin.
    """
    if not records:
        raise ValueError("at least one record is needed")
    N, U, Y = _spectra(records)
    bins = np.asarray(bins, dtype=int)
    Uk, Yk = U[:, bins], Y[:, bins]
    if np.any(np.abs(Uk) < MIN_INPUT):
        bad = bins[np.any(np.abs(Uk) < MIN_INPUT, axis=0)]
        raise ValueError(f"input has no power at bins {bad[:5].tolist()}")
    G = Yk / Uk
    M = len(records)
    G_hat = G.mean(axis=0)
    if M < 2:
        return FrfEstimate(bins, N, G_hat, None, M, None)
    var = np.var(G, axis=0, ddof=1)
    ys = var * np.mean(np.abs(Uk) ** 2, axis=0)
    return FrfEstimate(bins, N, G_hat, var, M, ys)


def bussgang_gain(u, y, return_stderr=False):
    """Static gain ``E{y u} / E{u^2}`` of the AC parts.

    With ``return_stderr`` the large-sample standard error of the ratio is
    returned as well (samples treated as independent).
    """
    u = np.asarray(getattr(u, "samples", u), dtype=float)
    y = np.asarray(getattr(y, "samples", y), dtype=float)
    u = u - u.mean()
    y = y - y.mean()
    suu = float(np.dot(u, u))
    if suu == 0.0:
        raise ValueError("input has no AC power")
    k = float(np.dot(u, y)) / suu
    if not return_stderr:
        return k
    n = len(u)
    se = float(np.std(u * (y - k * u)) * math.sqrt(n) / suu)
    return k, se


@dataclass(frozen=True)
class FitResult:
    model: RationalTF
    residual: float
    iterations: int
    converged: bool
    nb: int
    na: int
    delay: int
    noise_var: float = float("nan")

    def to_dict(self):
        from .rootlocus import roots
        rs = roots(self.model)
        return {"num": list(self.model.num), "den": list(self.model.den),
                "delay": self.model.delay, "nb": self.nb, "na": self.na,
                "residual": self.residual, "iterations": self.iterations,
                "converged": self.converged,
                "poles": [[z.real, z.imag] for z in rs.poles],
                "zeros": [[z.real, z.imag] for z in rs.zeros]}


def _weights(frf):
    if frf.var_G is None:
        return np.ones(len(frf.bins))
    floor = VAR_FLOOR * max(float(np.max(np.abs(frf.G_hat)) ** 2), np.finfo(float).tiny)
    return 1.0 / np.maximum(np.asarray(frf.var_G), floor)


def _powers(zeta, start, count):
    return zeta[:, None] ** (start + np.arange(count))[None, :]


def _real_stack(A, b):
    return np.vstack([A.real, A.imag]), np.concatenate([b.real, b.imag])


def _sk_step(G, zeta, sw, nb, na, delay, a_prev):
    """One Sanathanan-Koerner step: linear LS on ``A G - z^-d B``, scaled
    by ``1 / |A_prev|``."""
    scale = sw / np.abs(_poly.evaluate(np.r_[1.0, a_prev], zeta))
    Zb = _powers(zeta, delay, nb + 1)
    Za = _powers(zeta, 1, na)
    A = np.hstack([Zb, -G[:, None] * Za]) * scale[:, None]
    Ar, br = _real_stack(A, G * scale)
    # column equilibration keeps lstsq's rank decision meaningful
    cn = np.linalg.norm(Ar, axis=0)
    cn[cn == 0] = 1.0
    theta, _, rank, _ = np.linalg.lstsq(Ar / cn, br, rcond=None)
    if rank < Ar.shape[1]:
        raise FitError(f"rank-deficient regression (rank {rank} < {Ar.shape[1]} unknowns); "
                       "reduce the model order")
    theta = theta / cn
    return theta[:nb + 1], theta[nb + 1:]


def _model_response(b, a, zeta, delay):
    B = _poly.evaluate(b, zeta) * zeta ** delay
    A = _poly.evaluate(np.r_[1.0, a], zeta)
    return B, A


def _cost(G, zeta, sw, b, a, delay):
    B, A = _model_response(b, a, zeta, delay)
    e = sw * (G - B / A)
    return e, float(np.vdot(e, e).real)


def _jacobian(zeta, sw, b, a, nb, na, delay):
    B, A = _model_response(b, a, zeta, delay)
    Jb = -(sw / A)[:, None] * _powers(zeta, delay, nb + 1)
    Ja = (sw * B / A ** 2)[:, None] * _powers(zeta, 1, na)
    return np.hstack([Jb, Ja])


def fit_rational(frf, nb, na, delay=0, weights=None, max_iter=MAX_ITER, rtol=RTOL):
    """Fit ``z^-delay B(z^-1) / A(z^-1)`` to an FRF.

    Minimizes ``sum_k w_k |G_k - z_k^-d B(z_k^-1)/A(z_k^-1)|^2`` with
    ``w_k = 1 / max(var_G(k), 1e-12 max|G|^2)`` (unit weights when the
    variance is unavailable). Sanathanan-Koerner iterations provide the
    start; Levenberg-Marquardt steps refine it until the relative cost
    change drops below ``rtol`` or ``max_iter`` iterations pass.

    Parameters
    ----------
    frf : FrfEstimate
    nb, na : int
        Numerator and denominator orders.
    delay : int
        Known input delay in samples.
    weights : array_like, optional
        Overrides the variance-based weights.

    Returns
    -------
    FitResult

    Raises
    ------
    FitError
        Too few bins for the order, a rank-deficient regression, or a
        non-finite cost.
    """
    if nb < 0 or na < 0 or delay < 0:
        raise ValueError("orders and delay must be nonnegative")
    n_par = nb + 1 + na
    G = np.asarray(frf.G_hat, dtype=complex)
    if len(G) < n_par:
        raise FitError(f"{len(G)} bins cannot determine {n_par} parameters")
    if not np.all(np.isfinite(G)):
        raise FitError("FRF contains non-finite values")
    w = _weights(frf) if weights is None else np.asarray(weights, dtype=float)
    sw = np.sqrt(w)
    zeta = np.exp(-2j * np.pi * frf.freqs)

    # Levy start, then SK re-weighting
    a = np.zeros(na)
    b, a = _sk_step(G, zeta, sw, nb, na, delay, a)
    _, cost = _cost(G, zeta, sw, b, a, delay)
    it = 0
    for _ in range(20):
        it += 1
        b_new, a_new = _sk_step(G, zeta, sw, nb, na, delay, a)
        _, c_new = _cost(G, zeta, sw, b_new, a_new, delay)
        if not np.isfinite(c_new):
            break
        done = abs(cost - c_new) <= rtol * max(cost, 1e-300)
        if c_new <= cost or not np.isfinite(cost):
            b, a, cost = b_new, a_new, c_new
        if done:
            break

    # Levenberg-Marquardt refinement
    theta = np.r_[b, a]
    lam = 1e-3
    converged = na == 0 or cost == 0.0
    for _ in range(max_iter):
        if converged:
            break
        it += 1
        e, _ = _cost(G, zeta, sw, theta[:nb + 1], theta[nb + 1:], delay)
        J = _jacobian(zeta, sw, theta[:nb + 1], theta[nb + 1:], nb, na, delay)
        Jr, er = _real_stack(J, e)
        JtJ = Jr.T @ Jr
        g = Jr.T @ er
        accepted = False
        while lam < 1e12:
            H = JtJ + lam * np.diag(np.diag(JtJ) + 1e-300)
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + step
            _, c_new = _cost(G, zeta, sw, cand[:nb + 1], cand[nb + 1:], delay)
            if np.isfinite(c_new) and c_new <= cost:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            converged = True
            break
        rel = (cost - c_new) / max(cost, 1e-300)
        theta, cost = cand, c_new
        lam = max(lam / 3.0, 1e-12)
        if rel < rtol:
            converged = True

    if not np.isfinite(cost):
        raise FitError("fit produced a non-finite cost")
    b, a = theta[:nb + 1], theta[nb + 1:]
    if not np.any(b):
        raise FitError("fitted numerator vanished")
    den = np.r_[1.0, a]
    p = _poly.companion_roots(den)
    stable = bool(np.all(np.abs(p) < 1.0)) if p.size else True
    dof = max(2 * len(G) - n_par, 1)
    return FitResult(RationalTF(b, den, delay, stable), cost, it, bool(converged),
                     nb, na, delay, cost / dof)


@dataclass(frozen=True)
class OrderScan:
    """Fits over a range of orders ``(nb + k, na + k)``.

    ``dipoles[i]`` counts pole-zero pairs of fit ``i`` closer than the scan's
    pair tolerance. Such a pair barely shapes the FRF, so its location is
    not identifiable and its locus is noise.
    """

    orders: tuple
    fits: tuple
    residuals: tuple
    dipoles: tuple
    recommended: int

    @property
    def recommended_order(self):
        return self.orders[self.recommended]

    def to_dict(self):
        return {"orders": [list(o) for o in self.orders], "residuals": list(self.residuals),
                "dipoles": list(self.dipoles),
                "recommended": list(self.recommended_order)}


def count_dipoles(tf, pair_tol):
    from .rootlocus import ORIGIN_TOL, roots
    rs = roots(tf)
    ps = [p for p in rs.poles if abs(p) >= ORIGIN_TOL]
    zs = [z for z in rs.zeros if abs(z) >= ORIGIN_TOL]
    return sum(1 for z in zs if ps and min(abs(z - p) for p in ps) < pair_tol)


def order_scan(frf, nb, na, delay=0, lower=0, extra=2, pair_tol=1e-2, rel_gain=0.1):
    """Fit at orders ``(nb+k, na+k)`` for ``k = -lower..extra``.

    The recommended order is chosen among fits without dipoles (all fits
    when every one has them): the lowest order whose residual is within a
    factor ``1 + rel_gain`` of the best residual in that set.
    """
    orders, fits, dip = [], [], []
    for k in range(-lower, extra + 1):
        o = (nb + k, na + k, delay)
        if o[0] < 0 or o[1] < 0:
            continue
        try:
            fr = fit_rational(frf, o[0], o[1], delay)
        except FitError:
            continue
        orders.append(o)
        fits.append(fr)
        dip.append(count_dipoles(fr.model, pair_tol))
    if not fits:
        raise FitError("no order in the scan could be fitted")
    res = [f.residual for f in fits]
    pool = [i for i, d in enumerate(dip) if d == 0] or list(range(len(fits)))
    best = min(res[i] for i in pool)
    rec = next(i for i in pool if res[i] <= (1.0 + rel_gain) * best + 1e-300)
    return OrderScan(tuple(orders), tuple(fits), tuple(res), tuple(dip), rec)


@dataclass(frozen=True)
class ExcitationSpec:
    """Excitation protocol applied at every setpoint.

    ``kind`` is ``"multisine"`` (periodic, steady state via cyclic warm-up)
    or ``"gaussian"`` (transient warm-up discarded). ``band`` is the
    excited normalized-frequency band and ``eps`` the standard deviation.
    """

    kind: str = "multisine"
    N: int = 4096
    band: tuple = (0.0, 0.5)
    eps: float = 0.01
    M: int = 8
    phase_law: str = "uniform"
    warmup: Optional[int] = None
    noise_std: float = 0.0
    common_realizations: bool = True

    def __post_init__(self):
        if self.kind not in ("multisine", "gaussian"):
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.M < 1:
            raise ValueError("at least one realization is needed")

    @property
    def spectrum(self):
        return PowerSpectrum.flat(1.0, tuple(self.band))

    def bins(self):
        k = np.arange(1, self.N // 2)
        return k[self.spectrum(k / self.N) > 0]


@dataclass(frozen=True)
class SetpointResult:
    index: int
    op: object
    frf: FrfEstimate
    fit: Optional[FitResult]
    warmup: int


def _seed(seed, k, r, stream, common):
    key = [seed, r, stream] if common else [seed, k, r, stream]
    return np.random.SeedSequence(key)


def _one_setpoint(graph, k, op, exc, orders, seed):
    warm = exc.warmup if exc.warmup is not None else default_warmup(graph, op)
    bins = exc.bins()
    records = []
    for r in range(exc.M):
        ss = _seed(seed, k, r, 0, exc.common_realizations)
        if exc.kind == "multisine":
            spec = MultisineSpec(exc.N, tuple(bins), exc.spectrum, exc.phase_law,
                                 int(ss.generate_state(1)[0]))
            base = generate_multisine(spec)
            u = scale_to_class(base, exc.eps, "S_eps").with_dc(op.r_dc)
            y = simulate(graph, u, warmup=warm, periodic=True, op=op)
        else:
            base = generate_gaussian(exc.spectrum, exc.N + warm, int(ss.generate_state(1)[0]))
            u_full = scale_to_class(base, exc.eps, "S_eps").with_dc(op.r_dc)
            y = simulate(graph, u_full, warmup=warm, op=op)
            u = Signal(u_full.samples[warm:], op.r_dc, exc.eps, "S_eps")
        if exc.noise_std > 0:
            rng = np.random.default_rng(_seed(seed, k, r, 1, False))
            y = Signal(y.samples + exc.noise_std * rng.standard_normal(len(y)), y.dc, y.eps,
                       y.class_tag)
        records.append((u, y))
    frf = estimate_frf(records, bins)
    fit = None
    if orders is not None:
        nb, na, delay = orders
        fit = fit_rational(frf, nb, na, delay)
    return SetpointResult(k, op, frf, fit, warm)


def bla_at_setpoints(graph, setpoints, excitation, orders=(3, 4, 0), seed=0, jobs=1):
    """Solve, simulate, estimate and fit at every setpoint.

    Parameters
    ----------
    graph : BlockGraph
    setpoints : sequence of float
        Input DC levels.
    excitation : ExcitationSpec
    orders : (nb, na, delay) or None
        Fit orders; ``None`` skips the parametric fit.
    seed : int
        Root seed. With ``excitation.common_realizations`` realization
        ``r`` uses the same phases at every setpoint, so estimation errors
        are common to all setpoints.
    jobs : int
        Worker threads; results do not depend on it.

    Returns
    -------
    list of SetpointResult

    Raises
    ------
    SetpointError
        Wrapping the first failure, with its setpoint index.
    """
    setpoints = [float(r) for r in setpoints]
    ops = []
    prev, prev_r = None, None
    for k, r in enumerate(setpoints):
        try:
            op = solve_setpoint(graph, r, x0=prev, x0_r=prev_r)
        except Exception as exc:
            raise SetpointError(k, r, exc) from exc
        prev = {n.name: op.node_dc[n.name] for n in graph.linear_blocks()}
        prev_r = r
        ops.append(op)

    def work(k):
        try:
            return _one_setpoint(graph, k, ops[k], excitation, orders, seed)
        except Exception as exc:
            raise SetpointError(k, setpoints[k], exc) from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(work, k) for k in range(len(ops))]
            return [f.result() for f in futures]
    return [work(k) for k in range(len(ops))]


def write_frf_csv(path, items):
    """Long-form FRF table; ``items`` is a sequence of (setpoint, FrfEstimate)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setpoint", "bin", "freq", "re", "im", "var"])
        for sp, frf in items:
            var = frf.var_G if frf.var_G is not None else [float("nan")] * len(frf.bins)
            for k, g, v in zip(frf.bins, frf.G_hat, var):
                w.writerow(["" if sp is None else format(float(sp), ".17g"), int(k),
                            format(k / frf.N, ".17g"), format(g.real, ".17g"),
                            format(g.imag, ".17g"), format(float(v), ".17g")])


def fit_to_json(fit, path=None):
    text = json.dumps(fit.to_dict(), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


__all__ = ["FrfEstimate", "estimate_frf", "bussgang_gain", "FitResult", "fit_rational",
           "OrderScan", "order_scan", "count_dipoles", "ExcitationSpec", "SetpointResult",
           "bla_at_setpoints", "write_frf_csv", "fit_to_json"]
