"""Command-line interface.

    blockloci run CONFIG [--seed N] [--out-dir DIR] [--eps-override E] [--format json|csv] [--jobs J]
    blockloci oracle CONFIG [--out-dir DIR] [--format json|csv]
    blockloci rank CONFIG [--seed N] [--out-dir DIR] [--eps-override E] [--jobs J]
    blockloci validate CONFIG

Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 indeterminate classification.
"""
import argparse
import sys

from . import __version__
from .config import load_config
from .errors import ConfigError, GraphError, NumericalError
from .pipeline import (EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, dumps, run, run_oracle,
                       run_rank, write_outputs)


def _parser():
    p = argparse.ArgumentParser(
        prog="blockloci",
        description="Structure detection of block-oriented systems from pole/zero "
                    "movement of their best linear approximations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=True):
        sp.add_argument("config", help="experiment config (TOML, or JSON by extension)")
        sp.add_argument("--out-dir", default="blockloci_out",
                        help="directory for report.json and CSV tables")
        if sim:
            sp.add_argument("--seed", type=int, help="override the config seed")
            sp.add_argument("--eps-override", type=float,
                            help="override the excitation standard deviation")
            sp.add_argument("--jobs", type=int, default=1,
                            help="worker threads over setpoints (results do not depend on it)")

    sp = sub.add_parser("run", help="full analysis: estimate, fit, classify, verdict")
    common(sp)
    sp.add_argument("--format", choices=("json", "csv"), default="json",
                    help="stdout summary: verdict as JSON, or the loci table as CSV")
    sp = sub.add_parser("oracle", help="analytic loci from the true system only")
    common(sp, sim=False)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp = sub.add_parser("rank", help="branch-counting rank tests on estimated FRFs")
    common(sp)
    sp = sub.add_parser("validate", help="check a config and its system graph")
    sp.add_argument("config")
    return p


def _summary(result):
    rep = result.report
    keys = ("provenance", "classification", "verdict", "rank")
    out = {k: rep[k] for k in keys if k in rep}
    if isinstance(out.get("classification"), dict):
        out["classification"] = {k: v for k, v in out["classification"].items()
                                 if k != "tracks"}
    return out


def _emit(result, paths, fmt):
    if fmt == "csv" and "loci" in paths:
        with open(paths["loci"]) as fh:
            sys.stdout.write(fh.read())
    else:
        sys.stdout.write(dumps(_summary(result)))


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({cfg.graph.topology}, {len(cfg.graph.nodes)} nodes, "
                  f"{len(cfg.setpoints)} setpoints)")
            return EXIT_OK
        if args.command != "oracle":
            cfg = cfg.with_overrides(seed=args.seed, eps=args.eps_override)
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
        if args.command == "run":
            result = run(cfg, jobs=args.jobs)
        elif args.command == "oracle":
            result = run_oracle(cfg)
        else:
            result = run_rank(cfg, jobs=args.jobs)
        paths = write_outputs(result, args.out_dir)
        _emit(result, paths, getattr(args, "format", "json"))
        if result.status != EXIT_OK:
            print(f"blockloci: {result.report['classification']['error']}", file=sys.stderr)
        return result.status
    except (ConfigError, GraphError) as exc:
        print(f"blockloci: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"blockloci: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
