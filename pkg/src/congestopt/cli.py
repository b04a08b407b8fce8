"""Command line: ``congestopt run <config|preset>``, ``compare``, ``presets list``."""
from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .errors import ConfigError, IncompatibleReports, SolveError

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 2, 3


def _cmd_run(args) -> int:
    try:
        cfg = experiments.resolve_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = experiments.run(cfg, args.output)
    except SolveError as exc:
        print(f"solve error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    print(f"{cfg.name}: wrote {res.output}")
    solve = res.report.get("solve")
    if solve is not None:
        print(
            f"  iterations {solve['iterations']}  converged {solve['converged']}  "
            f"relative gap {solve['relative_gap']:.3e}  residual {solve['divergence_residual']:.3e}"
        )
        m = res.report["metrics"]
        print(f"  mean theta {m['mean_theta']:.4f}  sources {m['source_disc_mean']:.4f}  midpoint {m['midpoint_disc_mean']:.4f}")
    if res.exit_code == EXIT_NOT_CONVERGED:
        print("solver did not converge", file=sys.stderr)
    return res.exit_code


def _cmd_compare(args) -> int:
    try:
        a = experiments.load_report(args.report_a)
        b = experiments.load_report(args.report_b)
        out = experiments.compare(a, b, args.metric)
    except IncompatibleReports as exc:
        print(f"incompatible reports: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(out, sort_keys=True, indent=2))
    return EXIT_OK


def _cmd_presets(args) -> int:
    for name in experiments.preset_names():
        cfg = experiments.resolve_config(name)
        print(f"{name:24s} {cfg.kind}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="congestopt", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or bundled preset")
    run.add_argument("config")
    run.add_argument("-o", "--output", help="output directory (default runs/<name>)")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="metric deltas between two solve reports")
    cmp_.add_argument("report_a")
    cmp_.add_argument("report_b")
    cmp_.add_argument("--metric", default="all", choices=experiments.METRICS)
    cmp_.set_defaults(func=_cmd_compare)

    pre = sub.add_parser("presets", help="bundled presets")
    pre.add_argument("action", choices=["list"])
    pre.set_defaults(func=_cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
