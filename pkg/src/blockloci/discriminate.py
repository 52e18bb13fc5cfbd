"""Structure discrimination from pole/zero movement.

Each covered model family implies a (pole class, zero class) pair for its
linearization under setpoint changes. An observed pair therefore rules
families in or out. The conditions are necessary only: a compatible
family is not thereby shown to be adequate.
"""
import itertools
from dataclasses import asdict, dataclass, field

from .errors import GraphError

FAMILIES = ("single_branch", "parallel_ff", "ff_fb_parallel", "lfr_g4_zero",
            "lfr_g4_nonzero", "symmetric_fffb", "cascade_augmented")
CASCADE_BASES = ("parallel_ff", "ff_fb_parallel")
CLASSES = ("all_fixed", "mixed", "all_move")
_SHORT = {"all_fixed": "F", "mixed": "M", "all_move": "V"}

TABLE_CELLS = {
    ("all_fixed", "all_fixed"): "single branch",
    ("all_move", "all_fixed"): "single branch FF, poles in FB",
    ("all_move", "mixed"): "multi branch FF, poles in FB",
    ("all_move", "all_move"): "multi branch FF, no poles in FB",
    ("all_fixed", "all_move"): "parallel FF, no poles in FB",
    ("mixed", "all_fixed"): "1*",
    ("all_fixed", "mixed"): "2*",
    ("mixed", "mixed"): "3*",
    ("mixed", "all_move"): "4*",
}

DISCLAIMER = ("Compatibility is a necessary condition only: a compatible family "
              "can reproduce the observed pole/zero movement, which does not show "
              "that it models the system.")

# Rule ids cited by verdicts and consistency checks.
RULES = {
    "single-branch": "single branch: poles and zeros do not depend on the setpoint",
    "parallel-ff": "parallel feed-forward: poles stay fixed, zeros move",
    "ff-fb-poles": "feed-forward/feedback: feedback moves all poles, none stay fixed",
    "ff-fb-one-ff": "feed-forward/feedback: one feed-forward branch keeps all zeros fixed",
    "ff-fb-mixed-zeros": ("feed-forward/feedback: several dynamic feed-forward branches "
                          "with feedback poles give fixed and moving zeros"),
    "ff-fb-moving-zeros": ("feed-forward/feedback: several feed-forward branches without "
                           "feedback poles move all zeros"),
    "lfr-no-direct": ("LFR without direct term: zeros fixed, poles of G1 and G2 fixed, "
                      "loop poles move"),
    "lfr-direct": "LFR with direct term: zeros move, poles of G1, G2 and G4 fixed",
    "symmetric": ("symmetric feed-forward/feedback: G1 poles and G2 poles give fixed "
                  "poles and zeros, the nonlinear gain moves the rest"),
    "cascade": "cascading a single branch only adds fixed poles and zeros",
}


@dataclass(frozen=True)
class StructureDescriptor:
    """Family plus the branch and root counts that decide its loci.

    Counts follow the feed-forward/feedback naming: ``n_PFF`` poles and
    ``n_ZFF`` zeros in the feed-forward path, ``n_PFB``/``n_ZFB`` in the
    feedback path. For LFRs the feed-forward path is ``G1 G2`` and the
    feedback path ``G3``; ``n_PD``/``n_ZD`` count the direct term ``G4``.
    For symmetric structures feed-forward is ``G1`` and feedback ``G2``.
    ``cascade_augmented`` wraps ``base`` with a single branch adding
    ``n_PC`` fixed poles and ``n_ZC`` fixed zeros. Zero counts include
    delays (degree of the delay-padded numerator).
    """

    family: str
    n_FF: int = 1
    n_FB: int = 0
    n_PFF: int = 0
    n_PFB: int = 0
    n_ZFF: int = 0
    n_ZFB: int = 0
    n_NL: int = 1
    n_PD: int = 0
    n_ZD: int = 0
    n_PC: int = 0
    n_ZC: int = 0
    base: "StructureDescriptor" = None

    def validate(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family {self.family!r} is not covered")
        counts = [self.n_FF, self.n_FB, self.n_PFF, self.n_PFB, self.n_ZFF, self.n_ZFB,
                  self.n_NL, self.n_PD, self.n_ZD, self.n_PC, self.n_ZC]
        if any(c < 0 for c in counts):
            raise ValueError("counts must be nonnegative")
        if self.n_NL < 1:
            raise ValueError("at least one nonlinearity is required for setpoint dependence")
        f = self.family
        if f == "single_branch" and (self.n_FF != 1 or self.n_FB != 0):
            raise ValueError("a single branch has n_FF = 1 and n_FB = 0")
        if f == "parallel_ff":
            if self.n_FF < 2 or self.n_FB != 0:
                raise ValueError("parallel_ff needs n_FF >= 2 and n_FB = 0")
            if self.n_PFF + self.n_ZFF == 0:
                raise ValueError("degenerate: static parallel branches have no dynamics")
        if f == "ff_fb_parallel":
            if self.n_FF < 1 or self.n_FB < 1:
                raise ValueError("ff_fb_parallel needs n_FF >= 1 and n_FB >= 1")
            if self.n_PFF + self.n_ZFF + self.n_PFB + self.n_ZFB == 0:
                raise ValueError("degenerate: a static loop has no poles or zeros")
            if self.n_FF >= 2 and self.n_PFB >= 1 and self.n_PFF + self.n_ZFF == 0:
                raise ValueError("degenerate: static feed-forward branches act as one branch")
        if f in ("lfr_g4_zero", "lfr_g4_nonzero"):
            if self.n_PFB + self.n_ZFB == 0:
                raise ValueError("degenerate: G3 must be dynamic")
            if f == "lfr_g4_zero" and self.n_PD + self.n_ZD:
                raise ValueError("lfr_g4_zero has no direct term")
        if f == "symmetric_fffb":
            if self.n_NL not in (1, 2):
                raise ValueError("symmetric structures carry one or two nonlinearities")
            if self.n_PFB + self.n_ZFB == 0:
                raise ValueError("degenerate: G2 must be dynamic (it closes the loop)")
            if self.n_PFF + self.n_ZFF == 0:
                raise ValueError("degenerate: G1 must be dynamic")
        if f == "cascade_augmented":
            if self.base is None or self.base.family not in CASCADE_BASES:
                raise ValueError(f"cascade_augmented needs a base in {CASCADE_BASES}")
            if self.n_PC + self.n_ZC == 0:
                raise ValueError("degenerate: the cascaded branch adds no poles or zeros")
            self.base.validate()
        return self

    def to_dict(self):
        d = {k: v for k, v in asdict(self).items() if k != "base"}
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d


def _augment(cls, add_fixed):
    if not add_fixed or cls == "all_fixed":
        return cls
    return "mixed"


def predict_classes(structure):
    """Return the (pole class, zero class) a descriptor implies.

    Raises
    ------
    ValueError
        For descriptors outside the covered families or with degenerate
        dynamics.
    """
    s = structure.validate()
    f = s.family
    if f == "single_branch":
        return ("all_fixed", "all_fixed")
    if f == "parallel_ff":
        return ("all_fixed", "all_move")
    if f == "ff_fb_parallel":
        if s.n_FF == 1:
            return ("all_move", "all_fixed")
        if s.n_PFB == 0:
            return ("all_move", "all_move")
        return ("all_move", "mixed")
    if f == "lfr_g4_zero":
        poles = "mixed" if s.n_PFF >= 1 else "all_move"
        return (poles, "all_fixed")
    if f == "lfr_g4_nonzero":
        poles = "mixed" if s.n_PFF + s.n_PD >= 1 else "all_move"
        return (poles, "all_move")
    if f == "symmetric_fffb":
        # poles: A1 fixed, A2 + g B2 moving; zeros: A2 fixed, B1 + g A1 (or A1 + g B1) moving
        poles = "mixed" if s.n_PFF >= 1 else "all_move"
        zeros = "mixed" if s.n_PFB >= 1 else "all_move"
        return (poles, zeros)
    pc, zc = predict_classes(s.base)
    return (_augment(pc, s.n_PC > 0), _augment(zc, s.n_ZC > 0))


def _tf_counts(blocks):
    p = sum(b.na for b in blocks)
    z = sum(b.nb + b.delay for b in blocks)
    return p, z


def descriptor_from_graph(graph):
    """Descriptor of a graph built by one of the family builders."""
    lin = lambda names: [graph.node(n).block for n in names if graph.node(n).kind == "linear"]
    n_nl = sum(1 for n in graph.nonlinear_blocks() if not n.block.is_affine())
    topo = graph.topology
    if topo in ("single_branch", "parallel_ff", "ff_fb_parallel"):
        ff = [names for label, names in graph.groups if label == "ff"]
        fb = [names for label, names in graph.groups if label == "fb"]
        pff, zff = _tf_counts([b for names in ff for b in lin(names)])
        pfb, zfb = _tf_counts([b for names in fb for b in lin(names)])
        return StructureDescriptor(topo, n_FF=len(ff), n_FB=len(fb), n_PFF=pff, n_PFB=pfb,
                                   n_ZFF=zff, n_ZFB=zfb, n_NL=n_nl)
    groups = dict(graph.groups)
    blk = lambda label: [graph.node(n).block for n in groups.get(label, ())]
    if topo == "lfr":
        pff, zff = _tf_counts(blk("g1") + blk("g2"))
        pfb, zfb = _tf_counts(blk("g3"))
        pd, zd = _tf_counts(blk("g4"))
        fam = "lfr_g4_nonzero" if "g4" in groups else "lfr_g4_zero"
        return StructureDescriptor(fam, n_FF=1, n_FB=1, n_PFF=pff, n_PFB=pfb, n_ZFF=zff,
                                   n_ZFB=zfb, n_NL=n_nl, n_PD=pd, n_ZD=zd)
    if topo == "symmetric_fffb":
        pff, zff = _tf_counts(blk("g1"))
        pfb, zfb = _tf_counts(blk("g2"))
        return StructureDescriptor(topo, n_FF=1, n_FB=1, n_PFF=pff, n_PFB=pfb, n_ZFF=zff,
                                   n_ZFB=zfb, n_NL=n_nl)
    raise GraphError(f"no structure family for topology {topo!r}")


# -- family templates --------------------------------------------------------

def _instances(family):
    """Small grid of valid descriptors spanning every class pair the family
    can produce."""
    rng = range(0, 2)
    out = []
    if family == "cascade_augmented":
        for base in itertools.chain(_instances("parallel_ff"), _instances("ff_fb_parallel")):
            for pc, zc in itertools.product(rng, rng):
                out.append(StructureDescriptor("cascade_augmented", n_PC=pc, n_ZC=zc, base=base))
    else:
        nff = {"single_branch": [1], "parallel_ff": [2]}.get(family, [1, 2])
        nfb = {"single_branch": [0], "parallel_ff": [0]}.get(family, [1])
        nnl = [1, 2] if family == "symmetric_fffb" else [1]
        for a, b, p1, z1, p2, z2, pd, n in itertools.product(nff, nfb, rng, rng, rng, rng,
                                                             rng if family == "lfr_g4_nonzero" else [0],
                                                             nnl):
            out.append(StructureDescriptor(family, n_FF=a, n_FB=b, n_PFF=p1, n_ZFF=z1,
                                           n_PFB=p2, n_ZFB=z2, n_PD=pd, n_NL=n))
    valid = []
    for d in out:
        try:
            d.validate()
        except ValueError:
            continue
        valid.append(d)
    return valid


def _reachable(family):
    return {predict_classes(d) for d in _instances(family)}


_CONSTRAINTS = {
    ("ff_fb_parallel", ("all_move", "all_fixed")): "n_FF = 1, n_FB >= 1",
    ("ff_fb_parallel", ("all_move", "mixed")): "n_FF >= 2, n_FB >= 1, n_PFB >= 1, n_PFF + n_ZFF >= 1",
    ("ff_fb_parallel", ("all_move", "all_move")): "n_FF >= 2, n_FB >= 1, n_PFB = 0",
    ("parallel_ff", ("all_fixed", "all_move")): "n_FF >= 2, n_FB = 0, n_PFB = 0",
    ("single_branch", ("all_fixed", "all_fixed")): "n_FF = 1, n_FB = 0",
    ("lfr_g4_zero", ("mixed", "all_fixed")): "G4 = 0, G3 dynamic, G1 G2 with poles",
    ("lfr_g4_zero", ("all_move", "all_fixed")): "G4 = 0, G3 dynamic, G1 G2 without poles",
    ("lfr_g4_nonzero", ("mixed", "all_move")): "G4 != 0, G3 dynamic, G1 G2 G4 with poles",
    ("lfr_g4_nonzero", ("all_move", "all_move")): "G4 != 0, G3 dynamic, G1 G2 G4 without poles",
}


def _constraint(family, observed):
    if family in ("symmetric_fffb",):
        pc, zc = observed
        parts = ["G1 with poles" if pc == "mixed" else "G1 without poles",
                 "G2 with poles" if zc == "mixed" else "G2 without poles"]
        return ", ".join(parts)
    if family == "cascade_augmented":
        bases = sorted({d.base.family for d in _instances(family) if predict_classes(d) == observed})
        return "single branch cascaded with " + " or ".join(bases)
    return _CONSTRAINTS.get((family, observed), "")


def _violated_rule(family, observed):
    pc, zc = observed
    if family == "single_branch":
        return "single-branch"
    if family == "parallel_ff":
        return "parallel-ff"
    if family == "ff_fb_parallel":
        if pc != "all_move":
            return "ff-fb-poles"
        return "ff-fb-one-ff"
    if family == "lfr_g4_zero":
        return "lfr-no-direct"
    if family == "lfr_g4_nonzero":
        return "lfr-direct"
    if family == "symmetric_fffb":
        return "symmetric"
    return "cascade"


@dataclass(frozen=True)
class Verdict:
    observed: tuple
    table_cell: str
    compatible: tuple
    excluded: tuple
    disclaimer: str = DISCLAIMER

    def compatible_families(self):
        return [c["family"] for c in self.compatible]

    def excluded_families(self):
        return [c["family"] for c in self.excluded]

    def to_dict(self):
        return {"observed": {"pole_class": self.observed[0], "zero_class": self.observed[1]},
                "table_cell": self.table_cell,
                "compatible": [dict(c) for c in self.compatible],
                "excluded": [dict(c) for c in self.excluded],
                "disclaimer": self.disclaimer}


def _check_observed(observed):
    observed = tuple(observed)
    if len(observed) != 2 or any(c not in CLASSES for c in observed):
        raise ValueError(f"observed must be a (pole_class, zero_class) pair from {CLASSES}")
    return observed


def candidates(observed, families=FAMILIES):
    """Split ``families`` into those compatible with and excluded by an
    observed (pole class, zero class) pair."""
    observed = _check_observed(observed)
    comp, excl = [], []
    for fam in families:
        if observed in _reachable(fam):
            comp.append({"family": fam, "constraints": _constraint(fam, observed)})
        else:
            rule = _violated_rule(fam, observed)
            excl.append({"family": fam, "rule": rule, "reason": RULES[rule]})
    return Verdict(observed, TABLE_CELLS[observed], tuple(comp), tuple(excl))


def is_consistent(structure, observed):
    """Whether ``structure`` predicts ``observed``; returns (bool, explanation)."""
    observed = _check_observed(observed)
    pred = predict_classes(structure)
    rule = _rule_for(structure)
    if pred == observed:
        return True, f"{rule}: predicts {_fmt(pred)}, as observed"
    what = []
    if pred[0] != observed[0]:
        what.append(f"poles {_verb(pred[0])}")
    if pred[1] != observed[1]:
        what.append(f"zeros {_verb(pred[1])}")
    return False, f"{rule}: {' and '.join(what)} (predicts {_fmt(pred)}, observed {_fmt(observed)})"


def _rule_for(s):
    f = s.family
    if f == "ff_fb_parallel":
        if s.n_FF == 1:
            key = "ff-fb-one-ff"
        elif s.n_PFB == 0:
            key = "ff-fb-moving-zeros"
        else:
            key = "ff-fb-mixed-zeros"
    else:
        key = {"single_branch": "single-branch", "parallel_ff": "parallel-ff",
               "lfr_g4_zero": "lfr-no-direct", "lfr_g4_nonzero": "lfr-direct",
               "symmetric_fffb": "symmetric", "cascade_augmented": "cascade"}[f]
    return f"{key} ({RULES[key]})"


def _verb(cls):
    return {"all_fixed": "must all stay fixed", "all_move": "must all move",
            "mixed": "must be partly fixed, partly moving"}[cls]


def _fmt(pair):
    return f"({_SHORT[pair[0]]},{_SHORT[pair[1]]})"


__all__ = ["FAMILIES", "TABLE_CELLS", "DISCLAIMER", "RULES", "StructureDescriptor",
           "predict_classes", "descriptor_from_graph", "Verdict", "candidates", "is_consistent"]
