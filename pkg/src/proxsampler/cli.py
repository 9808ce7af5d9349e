"""Command-line experiment harness.

Exit codes: 0 on success, 1 on invalid input or configuration (including
I/O problems), 2 when a numerical routine fails.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from .config import load_config
from .errors import NumericError, ValidationError
from .experiments import OUTPUT_DIR_ENV, resolve_output, run_experiment, write_report
from .gaussian import GaussianState, gaussian_trajectory, kl_gauss, w2_gauss
from .potential import builtin
from .proxopt import prox_point_run, write_trajectory_rows
from .rates import THEOREMS, RateBound

log = logging.getLogger("proxsampler")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage errors are invalid input, not numeric failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _key_values(items) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValidationError(f"expected key=value, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ValidationError(f"value of {key!r} is not a number: {val!r}") from None
    return out


def _csv_out():
    return csv.writer(sys.stdout, lineterminator="\n")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    rows = run_experiment(cfg)
    path = resolve_output(cfg, args.output)
    write_report(rows, path)
    checked = [r for r in rows if r.satisfied is not None]
    failed = sum(1 for r in checked if not r.satisfied)
    print(f"{path}: {len(rows)} rows, {len(checked) - failed}/{len(checked)} bound checks satisfied",
          file=sys.stderr)
    return EXIT_OK


def cmd_rates(args) -> int:
    rb = RateBound(args.theorem, _key_values(args.params))
    w = _csv_out()
    w.writerow(["k", "bound"])
    for k, b in rb.curve(args.k_max, args.k_min):
        w.writerow([k, f"{b:.17g}"])
    return EXIT_OK


def cmd_gaussian_exact(args) -> int:
    target = GaussianState(np.zeros(1), args.sigma * args.eps)
    s0 = GaussianState([args.m0], args.sigma0)
    traj = gaussian_trajectory(s0, args.sigma, args.eta, args.k, args.eps)
    w = _csv_out()
    w.writerow(["k", "mean", "variance", "kl", "w2"])
    for k, s in enumerate(traj):
        w.writerow([k] + [f"{v:.17g}" for v in
                          (s.mean[0], s.cov[0, 0], kl_gauss(s, target), w2_gauss(s, target))])
    return EXIT_OK


def cmd_prox_point(args) -> int:
    f = builtin(args.potential, args.params)
    traj = prox_point_run(f, args.eta, args.x0, args.k)
    write_trajectory_rows(traj, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="proxsampler", description="Proximal sampler experiments and rate bounds.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config and write its CSV report",
                       description=f"Relative report paths go under ${OUTPUT_DIR_ENV} when set.")
    r.add_argument("config", help="TOML experiment configuration")
    r.add_argument("-o", "--output", help="report path (overrides the config)")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("rates", help="print a bound curve as CSV (k,bound)")
    b.add_argument("theorem", choices=THEOREMS)
    b.add_argument("--params", nargs="+", default=[], metavar="KEY=VALUE",
                   help="e.g. D_0=1 alpha=1 eta=0.5 q=2")
    b.add_argument("--k-max", type=int, default=20)
    b.add_argument("--k-min", type=int, default=0)
    b.set_defaults(func=cmd_rates)

    g = sub.add_parser("gaussian-exact", help="exact 1-D Gaussian recursion as CSV")
    g.add_argument("--sigma0", type=float, required=True, help="initial variance")
    g.add_argument("--m0", type=float, required=True, help="initial mean")
    g.add_argument("--eta", type=float, required=True)
    g.add_argument("--k", type=int, required=True, help="number of iterations")
    g.add_argument("--sigma", type=float, default=1.0, help="target variance (default 1)")
    g.add_argument("--eps", type=float, default=1.0, help="entropy level (default 1)")
    g.set_defaults(func=cmd_gaussian_exact)

    x = sub.add_parser("prox-point", help="proximal point iterates as CSV (k,f_value,residual)")
    x.add_argument("--potential", required=True)
    x.add_argument("--params", type=float, nargs="*", default=[])
    x.add_argument("--eta", type=float, required=True)
    x.add_argument("--x0", type=float, nargs="+", required=True)
    x.add_argument("--k", type=int, required=True)
    x.set_defaults(func=cmd_prox_point)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as exc:
        where = f" (chain {exc.chain})" if getattr(exc, "chain", None) is not None else ""
        print(f"numeric failure in {args.command}{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
