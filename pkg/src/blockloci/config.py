"""Experiment configuration files (TOML, or the same schema as JSON).

A config names the true system, the setpoints, the excitation protocol and
the analysis settings::

    seed = 7
    setpoints = { start = 0.0, stop = 1.0, step = 0.1 }

    [system]
    topology = "ff_fb_parallel"
    ff = [["G1", "f1"], ["G2", "f2"]]
    fb = [["G3", "f3"]]

    [system.blocks]
    G1 = { num = [0.15, 0.1], den = [1.0, -0.9] }
    f1 = { poly = [0.0, 1.0, 0.0, -0.3] }

Polynomial coefficients are listed in ascending powers of ``z^-1`` (linear
blocks) or of ``x`` (nonlinearities).
"""
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace

from . import __version__
from .errors import ConfigError, GraphError
from .estimate import ExcitationSpec
from .rootlocus import TOL_FIXED, TOL_MOVE
from .systems import graph as _g
from .systems.blocks import RationalTF, StaticNL

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class FitConfig:
    nb: int = 3
    na: int = 4
    delay: int = 0
    order_scan: bool = False
    scan_lower: int = 0
    scan_extra: int = 2
    auto_order: bool = False
    pair_tol: float = 1e-2


@dataclass(frozen=True)
class ExperimentConfig:
    system: dict
    graph: object = field(repr=False)
    setpoints: tuple
    excitation: ExcitationSpec
    fit: FitConfig = FitConfig()
    tol_fixed: float = TOL_FIXED
    tol_move: float = TOL_MOVE
    seed: int = 0
    oracle: bool = True
    name: str = ""

    def canonical(self):
        """Normalized, order-independent description used for provenance."""
        return {
            "name": self.name,
            "system": self.graph.to_dict(),
            "setpoints": list(self.setpoints),
            "excitation": {k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in asdict(self.excitation).items()},
            "fit": asdict(self.fit),
            "classify": {"tol_fixed": self.tol_fixed, "tol_move": self.tol_move},
            "seed": self.seed,
            "oracle": self.oracle,
        }

    def digest(self):
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        h = hashlib.sha256(text.encode())
        h.update(f"|seed={self.seed}|version={__version__}".encode())
        return h.hexdigest()

    def with_overrides(self, seed=None, eps=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if eps is not None:
            if eps <= 0:
                raise ConfigError("--eps-override must be positive")
            cfg = replace(cfg, excitation=replace(cfg.excitation, eps=float(eps)))
        return cfg


def read_raw(path):
    """Parse a TOML (or, by extension, JSON) file into a dict."""
    try:
        if str(path).endswith(".json"):
            with open(path) as fh:
                return json.load(fh)
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None


def _setpoints(raw):
    sp = raw.get("setpoints")
    if sp is None:
        raise ConfigError("'setpoints' is required")
    if isinstance(sp, dict):
        try:
            start, stop, step = float(sp["start"]), float(sp["stop"]), float(sp["step"])
        except KeyError as exc:
            raise ConfigError(f"setpoint range needs start, stop and step ({exc} missing)") from None
        if step <= 0 or stop < start:
            raise ConfigError("setpoint range needs step > 0 and stop >= start")
        n = int(round((stop - start) / step)) + 1
        vals = [round(start + i * step, 12) for i in range(n)]
    else:
        vals = [float(x) for x in sp]
    if not vals:
        raise ConfigError("setpoints must be nonempty")
    return tuple(vals)


def _block(name, d):
    try:
        if "num" in d:
            return RationalTF(tuple(d["num"]), tuple(d.get("den", (1.0,))),
                              int(d.get("delay", 0)), bool(d.get("stable", True)))
        if "poly" in d:
            return StaticNL.polynomial(d["poly"])
        if "pieces" in d:
            return StaticNL.piecewise(d.get("breakpoints", ()), d["pieces"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"block {name!r}: {exc}") from None
    raise ConfigError(f"block {name!r} needs num/den, poly, or breakpoints/pieces")


def build_system(sysraw):
    """BlockGraph from the ``[system]`` table."""
    if "nodes" in sysraw:
        try:
            return _g.check_graph(_g.BlockGraph.from_dict(sysraw))
        except (KeyError, ValueError, TypeError, GraphError) as exc:
            raise ConfigError(f"system graph: {exc}") from None
    blocks = {k: _block(k, v) for k, v in sysraw.get("blocks", {}).items()}
    topo = sysraw.get("topology")

    def ref(name):
        if name not in blocks:
            raise ConfigError(f"unknown block {name!r} in system structure")
        return blocks[name]

    def chain(names):
        return [(n, ref(n)) for n in names]

    def opt(key):
        return ref(sysraw[key]) if key in sysraw else None

    try:
        if topo == "single_branch":
            return _g.single_branch(chain(sysraw["chain"]))
        if topo == "parallel_ff":
            return _g.parallel_wh([chain(b) for b in sysraw["branches"]])
        if topo == "ff_fb_parallel":
            return _g.ff_fb_parallel([chain(b) for b in sysraw["ff"]],
                                     [chain(b) for b in sysraw["fb"]])
        if topo == "lfr":
            names = {k.lower(): sysraw[k] for k in ("G1", "G2", "G3", "G4", "f") if k in sysraw}
            names["nl"] = names.pop("f")
            return _g.lfr(ref(sysraw["G1"]), ref(sysraw["G2"]), ref(sysraw["G3"]),
                          ref(sysraw["f"]), opt("G4"), names=names)
        if topo == "symmetric_fffb":
            names = {k.lower(): sysraw[k] for k in ("G1", "G2") if k in sysraw}
            for k, v in (("f", "nl"), ("f1", "nl1"), ("f2", "nl2")):
                if k in sysraw:
                    names[v] = sysraw[k]
            return _g.symmetric_fffb(ref(sysraw["G1"]), ref(sysraw["G2"]), f=opt("f"),
                                     f1=opt("f1"), f2=opt("f2"), names=names)
    except KeyError as exc:
        raise ConfigError(f"system of topology {topo!r} misses key {exc}") from None
    except GraphError as exc:
        raise ConfigError(f"invalid system: {exc}") from None
    raise ConfigError(f"unknown topology {topo!r}")


def _excitation(raw):
    ex = dict(raw.get("excitation", {}))
    allowed = {"kind", "N", "band", "eps", "M", "phase_law", "warmup", "noise_std",
               "common_realizations"}
    extra = set(ex) - allowed
    if extra:
        raise ConfigError(f"unknown excitation keys: {sorted(extra)}")
    if "band" in ex:
        ex["band"] = tuple(float(x) for x in ex["band"])
    try:
        spec = ExcitationSpec(**ex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"excitation: {exc}") from None
    if spec.N <= 0 or spec.N % 2:
        raise ConfigError("excitation.N must be positive and even")
    lo, hi = spec.band
    if not 0.0 <= lo < hi <= 0.5:
        raise ConfigError("excitation.band must satisfy 0 <= lo < hi <= 0.5")
    if spec.kind == "multisine" and len(spec.bins()) == 0:
        raise ConfigError("excitation band contains no DFT bin")
    return spec


def from_dict(raw):
    """Validated ExperimentConfig from a parsed config mapping."""
    if "system" not in raw:
        raise ConfigError("'system' section is required")
    graph = build_system(raw["system"])
    fitraw = dict(raw.get("fit", {}))
    try:
        fit = FitConfig(**fitraw)
    except TypeError as exc:
        raise ConfigError(f"fit: {exc}") from None
    if min(fit.nb, fit.na, fit.delay) < 0:
        raise ConfigError("fit orders must be nonnegative")
    cl = raw.get("classify", {})
    tol_fixed = float(cl.get("tol_fixed", TOL_FIXED))
    tol_move = float(cl.get("tol_move", TOL_MOVE))
    if not 0 < tol_fixed < tol_move:
        raise ConfigError("classify needs 0 < tol_fixed < tol_move")
    return ExperimentConfig(
        system=raw["system"], graph=graph, setpoints=_setpoints(raw),
        excitation=_excitation(raw), fit=fit, tol_fixed=tol_fixed, tol_move=tol_move,
        seed=int(raw.get("seed", 0)), oracle=bool(raw.get("oracle", True)),
        name=str(raw.get("name", "")))


def load_config(path):
    cfg = from_dict(read_raw(path))
    if not cfg.name:
        cfg = replace(cfg, name=os.path.splitext(os.path.basename(str(path)))[0])
    return cfg


def bundled_config(name):
    """Path of a config shipped with the package, e.g. ``"paper_sec5"`` or
    ``"table/lfr_g4_zero"``."""
    here = os.path.join(os.path.dirname(__file__), "configs")
    path = os.path.join(here, name if name.endswith((".toml", ".json")) else name + ".toml")
    if not os.path.exists(path):
        raise ConfigError(f"no bundled config {name!r}")
    return path


def list_bundled(sub=""):
    here = os.path.join(os.path.dirname(__file__), "configs", sub)
    return sorted(os.path.join(here, f) for f in os.listdir(here) if f.endswith(".toml"))


__all__ = ["FitConfig", "ExperimentConfig", "read_raw", "build_system", "from_dict",
           "load_config", "bundled_config", "list_bundled"]
