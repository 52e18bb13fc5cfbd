"""End-to-end analysis of one configured experiment.

Operating points, BLA estimates and fits at every setpoint, root loci and
their classification, the structural verdict, the branch-counting rank
tests and (when the nonlinearities are smooth) the analytic oracle.
"""
import json
import math
import os
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__
from .discriminate import candidates
from .errors import IndeterminateClassification, LinearizationError, NumericalError
from .estimate import bla_at_setpoints, fit_rational, order_scan, write_frf_csv
from .linearize import linearize_graph
from .rootlocus import (ORIGIN_TOL, classify, rank_branches, rank_feedback, roots,
                        track_roots, write_loci_csv)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INDETERMINATE = 0, 2, 3, 4


@dataclass
class RunResult:
    """Everything a run produced; ``report`` is the JSON-ready summary."""

    report: dict
    setpoint_results: list = field(repr=False)
    rootsets: list = field(repr=False)
    classification: object = None
    oracle_rootsets: list = field(default=None, repr=False)
    oracle_classification: object = None
    status: int = EXIT_OK


# ---------------------------------------------------------------- helpers


def provenance(cfg):
    return {"config_sha256": cfg.digest(), "seed": cfg.seed, "version": __version__,
            "name": cfg.name}


def _nonorigin(z):
    z = np.asarray(z, dtype=complex)
    return z[np.abs(z) >= ORIGIN_TOL]


def root_errors(estimated, reference):
    """Largest distance between optimally matched roots of two sets.

    Roots are paired by minimum total distance; with unequal counts only
    the smaller set is matched and the surplus is reported separately.
    """
    a, b = _nonorigin(estimated), _nonorigin(reference)
    if len(a) == 0 or len(b) == 0:
        return {"max_error": None, "unmatched": int(abs(len(a) - len(b)))}
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return {"max_error": float(cost[i, j].max()), "unmatched": int(abs(len(a) - len(b)))}


def _roots_json(z):
    return [[float(x.real), float(x.imag)] for x in z]


def _majority(orders):
    counts = Counter(orders)
    top = max(counts.values())
    # ties go to the lowest order
    return min((o for o, c in counts.items() if c == top), key=lambda o: (o[0] + o[1], o))


def _classify_sets(rootsets, tol_fixed, tol_move):
    tracks = track_roots(rootsets, "pole") + track_roots(rootsets, "zero")
    return classify(tracks, tol_fixed, tol_move)


def _rank_tests(results, fits):
    frfs = [r.frf for r in results]
    noise_var = None
    if frfs[0].var_G is None and fits:
        nv = [f.noise_var for f in fits if math.isfinite(f.noise_var)]
        noise_var = float(np.median(nv)) if nv else None
    out = {}
    for key, fn in (("branches", rank_branches), ("feedback", rank_feedback)):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                res = fn(frfs, noise_var=noise_var)
            except NumericalError as exc:
                out[key] = {"error": str(exc)}
                continue
        d = res.to_dict()
        d["warnings"] = [str(w.message) for w in caught]
        out[key] = d
    return out


# ---------------------------------------------------------------- stages


def fit_all(cfg, results):
    """Fit every setpoint, scanning orders first when configured.

    Returns the fits, the per-setpoint scans (or None) and the order used.
    """
    fc = cfg.fit
    base = (fc.nb, fc.na, fc.delay)
    if not fc.order_scan:
        return [fit_rational(r.frf, *base) for r in results], None, base
    scans = []
    for r in results:
        scans.append(order_scan(r.frf, fc.nb, fc.na, fc.delay, lower=fc.scan_lower,
                                extra=fc.scan_extra, pair_tol=fc.pair_tol))
    chosen = _majority([s.recommended_order for s in scans]) if fc.auto_order else base
    fits = []
    for r, s in zip(results, scans):
        if chosen in s.orders:
            fits.append(s.fits[s.orders.index(chosen)])
        else:
            fits.append(fit_rational(r.frf, *chosen))
    return fits, scans, chosen


def oracle_models(cfg, ops):
    """Analytic linearizations at the solved operating points."""
    return [linearize_graph(cfg.graph, op) for op in ops]


def run(cfg, jobs=1):
    """Run the full analysis for ``cfg``.

    Numerical failures propagate (as SetpointError and friends). An
    indeterminate classification does not: it is recorded in the report and
    reflected in ``status``.
    """
    sps = cfg.setpoints
    results = bla_at_setpoints(cfg.graph, sps, cfg.excitation, orders=None,
                               seed=cfg.seed, jobs=jobs)
    fits, scans, chosen = fit_all(cfg, results)
    rootsets = [roots(f.model, sp) for f, sp in zip(fits, sps)]

    status = EXIT_OK
    report = {"provenance": provenance(cfg), "config": cfg.canonical()}
    report["setpoints"] = [{
        "index": r.index, "r_dc": r.op.r_dc, "y_dc": r.op.y_dc,
        "dc_residual": r.op.residual, "warmup": r.warmup,
        "fit": f.to_dict(),
    } for r, f in zip(results, fits)]
    report["fit_order"] = {"nb": chosen[0], "na": chosen[1], "delay": chosen[2],
                           "configured": [cfg.fit.nb, cfg.fit.na, cfg.fit.delay],
                           "scans": [s.to_dict() for s in scans] if scans else None}

    classification = None
    if len(sps) < 2:
        report["classification"] = {"error": "tracking needs at least two setpoints"}
        report["verdict"] = None
        status = EXIT_INDETERMINATE
    else:
        try:
            classification = _classify_sets(rootsets, cfg.tol_fixed, cfg.tol_move)
        except IndeterminateClassification as exc:
            report["classification"] = {"error": str(exc)}
            report["verdict"] = None
            status = EXIT_INDETERMINATE
        else:
            report["classification"] = classification.to_dict()
            report["verdict"] = candidates(classification.observed).to_dict()

    report["rank"] = _rank_tests(results, fits) if len(sps) >= 2 else None

    o_sets, o_class = None, None
    if cfg.oracle:
        report["oracle"], o_sets, o_class = _oracle_section(cfg, results, rootsets)
    return RunResult(report, results, rootsets, classification, o_sets, o_class, status)


def _oracle_section(cfg, results, rootsets):
    try:
        models = oracle_models(cfg, [r.op for r in results])
    except LinearizationError as exc:
        return {"error": str(exc)}, None, None
    o_sets = [roots(m.tf, r.op.r_dc) for m, r in zip(models, results)]
    sec = {"setpoints": []}
    for m, est, ref in zip(models, rootsets, o_sets):
        sec["setpoints"].append({
            "r_dc": m.setpoint.r_dc,
            "poles": _roots_json(ref.poles), "zeros": _roots_json(ref.zeros),
            "branch_gains": dict(m.branch_gains),
            "pole_error": root_errors(est.poles, ref.poles),
            "zero_error": root_errors(est.zeros, ref.zeros)})
    o_class = None
    if len(o_sets) >= 2:
        try:
            o_class = _classify_sets(o_sets, cfg.tol_fixed, cfg.tol_move)
            sec["classification"] = o_class.to_dict()
        except IndeterminateClassification as exc:
            sec["classification"] = {"error": str(exc)}
    return sec, o_sets, o_class


def run_oracle(cfg):
    """Analytic loci only: no simulation, no estimation."""
    from .systems.setpoint import sweep_setpoints
    ops = sweep_setpoints(cfg.graph, cfg.setpoints)
    models = oracle_models(cfg, ops)
    o_sets = [roots(m.tf, op.r_dc) for m, op in zip(models, ops)]
    report = {"provenance": provenance(cfg), "config": cfg.canonical(),
              "models": [m.to_dict() for m in models]}
    status, cls = EXIT_OK, None
    if len(o_sets) >= 2:
        try:
            cls = _classify_sets(o_sets, cfg.tol_fixed, cfg.tol_move)
            report["classification"] = cls.to_dict()
            report["verdict"] = candidates(cls.observed).to_dict()
        except IndeterminateClassification as exc:
            report["classification"] = {"error": str(exc)}
            status = EXIT_INDETERMINATE
    return RunResult(report, [], o_sets, cls, status=status)


def run_rank(cfg, jobs=1):
    """Nonparametric FRFs and the two rank tests only."""
    results = bla_at_setpoints(cfg.graph, cfg.setpoints, cfg.excitation, orders=None,
                               seed=cfg.seed, jobs=jobs)
    fits = []
    if results[0].frf.var_G is None:
        # single realization: the fit residual supplies the noise level
        fits = [fit_rational(r.frf, cfg.fit.nb, cfg.fit.na, cfg.fit.delay) for r in results]
    report = {"provenance": provenance(cfg), "config": cfg.canonical(),
              "rank": _rank_tests(results, fits)}
    return RunResult(report, results, [])


# ---------------------------------------------------------------- output


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        s = format(x, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, 0)}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.number, str, bool)) or v is None for v in obj):
            return "[" + ", ".join(_encode(v, indent, 0) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """Deterministic JSON: sorted keys, 17 significant digits, NaN as null."""
    return _encode(obj, indent, 0) + "\n"


def write_outputs(result, out_dir):
    """Write report.json plus the CSV tables of ``result`` into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {"report": os.path.join(out_dir, "report.json")}
    with open(paths["report"], "w") as fh:
        fh.write(dumps(result.report))
    if result.classification is not None:
        paths["loci"] = os.path.join(out_dir, "loci.csv")
        write_loci_csv(paths["loci"], result.classification, result.rootsets)
    if result.oracle_classification is not None:
        paths["oracle_loci"] = os.path.join(out_dir, "oracle_loci.csv")
        write_loci_csv(paths["oracle_loci"], result.oracle_classification,
                       result.oracle_rootsets)
    if result.setpoint_results:
        paths["frf"] = os.path.join(out_dir, "frf.csv")
        write_frf_csv(paths["frf"], [(r.op.r_dc, r.frf) for r in result.setpoint_results])
    return paths


__all__ = ["RunResult", "run", "run_oracle", "run_rank", "fit_all", "root_errors",
           "dumps", "write_outputs", "provenance", "EXIT_OK", "EXIT_CONFIG",
           "EXIT_NUMERIC", "EXIT_INDETERMINATE"]
