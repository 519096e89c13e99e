"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 at least one row
or check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import information as inf
from .config import ConfigError, RunConfig, load_config
from .params import InvalidParameterError
from .sweep import SweepSpec, make_provider, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def _load(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    spec = SweepSpec.from_config(cfg)
    out = Path(args.out)
    rows = run_sweep(spec, out, workers=args.workers, plots=not args.no_plots)
    failed = sum(r.failed for r in rows)
    print(f"{spec.name}: {len(rows)} rows, {failed} failed -> {out / (spec.name + '.csv')}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_distribution(args) -> int:
    cfg = _load(args.config)
    p = cfg.model
    method = args.method
    provider = make_provider(method, cfg.numerics)
    t = args.time if args.time is not None else (cfg.numerics.dist_time or 100.0 / p.gamma)
    try:
        d = inf.distribution(provider, p, t)
    except (inf.EnlargeWindowError, ArithmeticError, RuntimeError) as exc:
        print(f"distribution failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "distribution.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("q", "probability"))
        for q, pr in zip(d.support, d.probabilities):
            w.writerow((int(q), f"{pr:.12g}"))
    print(f"t={t:g} mean={d.mean():.8g} variance={d.variance():.8g} -> {path}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import run_validation

    cfg = _load(args.config)
    report = run_validation(cfg.model, args.out, quick=args.quick, echo=print)
    print(f"report -> {Path(args.out) / 'validate-report.json'}")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_show_config(args) -> int:
    print(json.dumps(_load(args.config).to_dict(), indent=2))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="fcsreadout", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default="results")
    s.add_argument("--workers", type=int, default=None, help="process count (default FCS_WORKERS or 1)")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("distribution", help="counting distribution at a finite time")
    d.add_argument("--config")
    d.add_argument("--out", default="results")
    d.add_argument("--time", type=float, default=None)
    d.add_argument("--method", choices=("meanfield", "numeric"), default="meanfield")
    d.set_defaults(func=cmd_distribution)

    v = sub.add_parser("validate", help="run the analytic-versus-numeric checks")
    v.add_argument("--config")
    v.add_argument("--out", default="results")
    v.add_argument("--quick", action="store_true", help="skip the slow numeric checks")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("show-config", help="print the resolved configuration")
    c.add_argument("--config")
    c.set_defaults(func=cmd_show_config)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
