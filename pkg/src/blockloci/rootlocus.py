"""Pole/zero loci across setpoints: extraction, tracking, classification
and the branch-counting rank tests."""
import csv
import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _poly
from .errors import IndeterminateClassification, NumericalError

ORIGIN_TOL = 1e-8
TOL_FIXED = 0.01
TOL_MOVE = 0.05
RANK_RTOL = 1e-6
CLASSES = ("all_fixed", "mixed", "all_move")


@dataclass(frozen=True)
class RootSet:
    """Poles and zeros (in z) of one model, tagged with its setpoint."""

    setpoint: Optional[float]
    poles: np.ndarray
    zeros: np.ndarray
    gain: float

    def of_kind(self, kind):
        if kind not in ("pole", "zero"):
            raise ValueError(f"kind must be 'pole' or 'zero', got {kind!r}")
        return self.poles if kind == "pole" else self.zeros


def roots(tf, setpoint=None):
    """Poles and zeros of ``tf`` as a function of z.

    ``z^-d B(z^-1) / A(z^-1)`` equals ``z^(na-nb-d) B~(z) / A~(z)``, so a
    positive excess adds zeros at the origin and a negative one adds poles
    there.
    """
    num, den = np.asarray(tf.num), np.asarray(tf.den)
    zeros = _poly.companion_roots(num)
    poles = _poly.companion_roots(den)
    lead = _poly.leading_zeros(num)
    excess = (len(den) - 1) - (len(num) - 1 - lead) - (tf.delay + lead)
    if excess > 0:
        zeros = np.concatenate([zeros, np.zeros(excess, dtype=complex)])
    elif excess < 0:
        poles = np.concatenate([poles, np.zeros(-excess, dtype=complex)])
    return RootSet(setpoint, _poly.sort_roots(poles), _poly.sort_roots(zeros),
                   float(num[lead]))


@dataclass(frozen=True)
class RootTrack:
    """One root followed across setpoints; NaN marks a gap."""

    kind: str
    setpoints: tuple
    points: np.ndarray = field(repr=False)
    dispersion: float = 0.0
    label: Optional[str] = None

    @property
    def present(self):
        return ~np.isnan(self.points.real)

    @property
    def n_points(self):
        return int(self.present.sum())

    def mean(self):
        return complex(np.mean(self.points[self.present]))


def _dispersion(points):
    p = points[~np.isnan(points.real)]
    if len(p) < 2:
        return 0.0
    return float(np.max(np.abs(p[:, None] - p[None, :])))


def track_roots(rootsets, kind, origin_tol=ORIGIN_TOL):
    """Chain roots of consecutive root sets into tracks.

    Consecutive sets are matched greedily, closest pair first. A root left
    without a partner opens a new track; a track left without one ends.
    Roots within ``origin_tol`` of the origin (pure delays) are skipped.
    """
    if len(rootsets) < 2:
        raise ValueError("tracking needs at least two setpoints")
    m = len(rootsets)
    sps = tuple(rs.setpoint for rs in rootsets)
    tracks = []     # list of lists of complex (nan for gaps)
    active = []     # indices into tracks still open
    for k, rs in enumerate(rootsets):
        new = [complex(r) for r in rs.of_kind(kind) if abs(r) >= origin_tol]
        pairs = sorted(
            (abs(tracks[t][k - 1] - r), ti, ri)
            for ti, t in enumerate(active) for ri, r in enumerate(new))
        used_t, used_r, matched = set(), set(), {}
        for _, ti, ri in pairs:
            if ti in used_t or ri in used_r:
                continue
            used_t.add(ti)
            used_r.add(ri)
            matched[active[ti]] = new[ri]
        for t in active:
            tracks[t].append(matched.get(t, complex(np.nan, np.nan)))
        active = [t for t in active if t in matched]
        for ri, r in enumerate(new):
            if ri not in used_r:
                tracks.append([complex(np.nan, np.nan)] * k + [r])
                active.append(len(tracks) - 1)
    out = []
    for pts in tracks:
        pts = np.array(pts + [complex(np.nan, np.nan)] * (m - len(pts)))
        out.append(RootTrack(kind, sps, pts, _dispersion(pts)))
    return out


@dataclass(frozen=True)
class LocusClassification:
    pole_class: str
    zero_class: str
    tracks: tuple = field(repr=False)
    ambiguous_count: int = 0
    tol_fixed: float = TOL_FIXED
    tol_move: float = TOL_MOVE

    @property
    def observed(self):
        return (self.pole_class, self.zero_class)

    def of_kind(self, kind):
        return [t for t in self.tracks if t.kind == kind]

    def to_dict(self):
        return {"pole_class": self.pole_class, "zero_class": self.zero_class,
                "ambiguous_count": self.ambiguous_count,
                "tol_fixed": self.tol_fixed, "tol_move": self.tol_move,
                "tracks": [{"kind": t.kind, "label": t.label, "dispersion": t.dispersion,
                            "mean": [t.mean().real, t.mean().imag]} for t in self.tracks]}


def label_track(track, tol_fixed=TOL_FIXED, tol_move=TOL_MOVE):
    # a root seen at one setpoint only says nothing about movement
    if track.n_points < 2:
        return "ambiguous"
    if track.dispersion < tol_fixed:
        return "fixed"
    if track.dispersion > tol_move:
        return "moving"
    return "ambiguous"


def _vote(labels, kind):
    if not labels:
        return "all_fixed"
    decided = [lb for lb in labels if lb != "ambiguous"]
    if not decided:
        raise IndeterminateClassification(
            f"all {len(labels)} {kind} tracks are ambiguous")
    fixed = decided.count("fixed")
    if fixed == len(decided):
        return "all_fixed"
    if fixed == 0:
        return "all_move"
    return "mixed"


def classify(tracks, tol_fixed=TOL_FIXED, tol_move=TOL_MOVE):
    """Label each track and derive the (pole class, zero class) pair.

    A track is fixed if its dispersion is below ``tol_fixed``, moving if
    above ``tol_move`` and ambiguous otherwise. Ambiguous tracks are left
    out of the vote. A kind without tracks counts as all fixed.

    Raises
    ------
    IndeterminateClassification
        If every track of a kind is ambiguous.
    """
    if not tol_fixed < tol_move:
        raise ValueError("tol_fixed must be smaller than tol_move")
    labelled = tuple(replace(t, label=label_track(t, tol_fixed, tol_move)) for t in tracks)
    pc = _vote([t.label for t in labelled if t.kind == "pole"], "pole")
    zc = _vote([t.label for t in labelled if t.kind == "zero"], "zero")
    amb = sum(t.label == "ambiguous" for t in labelled)
    return LocusClassification(pc, zc, labelled, amb, tol_fixed, tol_move)


def classify_models(tfs, setpoints=None, tol_fixed=TOL_FIXED, tol_move=TOL_MOVE):
    """Roots, tracks and classification for a sequence of models."""
    if setpoints is None:
        setpoints = range(len(tfs))
    rsets = [roots(tf, sp) for tf, sp in zip(tfs, setpoints)]
    tracks = track_roots(rsets, "pole") + track_roots(rsets, "zero")
    return classify(tracks, tol_fixed, tol_move)


@dataclass(frozen=True)
class RankResult:
    """Numerical rank with its singular values; unpacks as
    ``(rank, singular_values)``."""

    rank: int
    singular_values: np.ndarray
    threshold: float
    capped: bool = False

    def __iter__(self):
        return iter((self.rank, self.singular_values))

    def gap(self):
        """Ratio of the last retained to the first discarded singular value."""
        s = self.singular_values
        if self.rank == 0 or self.rank >= len(s):
            return float("inf")
        return float(s[self.rank - 1] / s[self.rank]) if s[self.rank] > 0 else float("inf")

    def to_dict(self):
        return {"rank": self.rank, "singular_values": [float(x) for x in self.singular_values],
                "threshold": self.threshold, "capped": self.capped}


def _stack(frfs):
    if len(frfs) < 2:
        raise ValueError("rank tests need at least two setpoints")
    bins = np.asarray(frfs[0].bins)
    for f in frfs[1:]:
        if not np.array_equal(np.asarray(f.bins), bins):
            raise ValueError("all FRFs must share the same bins")
    return np.column_stack([np.asarray(f.G_hat) for f in frfs])


def _rank(mat, noise, rtol):
    """``noise`` holds per-entry error variances of ``mat`` (or None)."""
    s = np.linalg.svd(mat, compute_uv=False)
    thr = rtol * s[0]
    if noise is not None:
        # ||E||_2 <= ||E||_F, whatever the correlation between entries
        thr = max(thr, float(np.sqrt(np.sum(noise))))
    r = int(np.sum(s > thr))
    capped = r == mat.shape[1]
    if capped:
        warnings.warn(f"rank equals the number of setpoints ({r}); the true count "
                      "may be larger, add setpoints", RuntimeWarning, stacklevel=3)
    return RankResult(r, s, float(thr), capped)


def _noise(frfs, shape, noise_var):
    """Per-entry variance of the averaged FRF estimates."""
    if noise_var is not None:
        return np.full(shape, float(noise_var))
    if any(getattr(f, "var_G", None) is None for f in frfs):
        return None
    if min(f.M for f in frfs) < 2:
        return None
    return np.column_stack([np.asarray(f.var_G) / f.M for f in frfs])


def rank_branches(frfs, rtol=RANK_RTOL, noise_var=None):
    """Numerical rank of ``[G_1 ... G_m]``: the number of parallel branches.

    Singular values count when above ``rtol * s_1`` and, for estimated FRFs,
    above the Frobenius norm of the estimation error, an upper bound on its
    largest singular value. ``noise_var`` overrides the per-entry error
    variance (useful with single-realization estimates).
    """
    mat = _stack(frfs)
    return _rank(mat, _noise(frfs, mat.shape, noise_var), rtol)


def rank_feedback(frfs, rtol=RANK_RTOL, noise_var=None):
    """Numerical rank of the element-wise inverse ``[1/G_1 ... 1/G_m]``.

    With one feed-forward branch it equals the number of feedback branches
    plus one. Error variances are propagated to the inverse to first order.
    """
    mat = _stack(frfs)
    if (np.abs(mat) < 1e-12).any():
        raise NumericalError("FRF magnitude below 1e-12; element-wise inverse undefined")
    noise = _noise(frfs, mat.shape, noise_var)
    if noise is not None:
        noise = noise / np.abs(mat) ** 4
    return _rank(1.0 / mat, noise, rtol)


def write_loci_csv(path, classification, rootsets=None):
    """Long-form loci table (one row per track point), ready for plotting.

    Origin roots excluded from tracking are appended with track id -1 when
    ``rootsets`` is given.
    """
    with open(path, "w", newline="") as fh:
        fh.write("# gnuplot: set datafile separator ','; "
                 "plot 'loci.csv' using 4:5 every ::1 with points\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setpoint", "kind", "track_id", "re", "im", "dispersion", "label"])
        counter = {"pole": itertools.count(), "zero": itertools.count()}
        for t in classification.tracks:
            tid = next(counter[t.kind])
            for sp, z in zip(t.setpoints, t.points):
                if np.isnan(z.real):
                    continue
                w.writerow([_f(sp), t.kind, tid, _f(z.real), _f(z.imag),
                            _f(t.dispersion), t.label])
        for rs in rootsets or ():
            for kind in ("pole", "zero"):
                for z in rs.of_kind(kind):
                    if abs(z) < ORIGIN_TOL:
                        w.writerow([_f(rs.setpoint), kind, -1, _f(z.real), _f(z.imag),
                                    _f(0.0), "origin"])


def _f(x):
    return format(float(x), ".17g")


__all__ = ["RootSet", "roots", "RootTrack", "track_roots", "LocusClassification",
           "classify", "classify_models", "label_track", "RankResult",
           "rank_branches", "rank_feedback", "write_loci_csv"]
