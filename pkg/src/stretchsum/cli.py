"""Command-line interface. Exit codes: 0 ok, 2 configuration error, 3 numeric error."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import dist, harness, theory
from .errors import ConfigError, DomainError, NumericError, ResourceError
from .mc import ESTIMATORS
from .weights import realize

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _common(p):
    p.add_argument("--config", type=Path, help="flat key = value experiment file")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--workers", type=int, default=1,
                   help="worker threads; affects wall time only, never results")
    p.add_argument("--out", type=Path, help="output file (default: stdout or output_path)")


def _dist_args(p):
    p.add_argument("--kappa", type=float, help="tail scale (default 1, or from --config)")
    p.add_argument("--r", type=float, help="tail exponent in (0, 1) (default 0.5)")


def _params(args, cfg):
    kappa = args.kappa if args.kappa is not None else (cfg.dist.kappa if cfg else 1.0)
    r = args.r if args.r is not None else (cfg.dist.r if cfg else 0.5)
    return dist.StretchedExpParams(kappa, r)


def _config(args, required=True):
    if args.config is None:
        if required:
            raise ConfigError("--config is required for this subcommand")
        return None
    cfg = harness.load_config(args.config)
    return harness.with_overrides(cfg, seed=args.seed)


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_tail(args):
    params = _params(args, _config(args, required=False))
    lines = [f"{t:.17g}\t{dist.tail(params, t):.17g}\n" for t in args.t]
    _emit("".join(lines), args.out)


def cmd_rate(args):
    cfg = _config(args, required=False)
    params = _params(args, cfg)
    x = args.x if args.x is not None else (cfg.x if cfg else None)
    if x is None:
        raise ConfigError("--x is required")
    D = args.D if args.D is not None else (cfg.limit.D if cfg else 1.0)
    _emit(f"{theory.rate_function(x, params, D):.17g}\n", args.out)


def _grid(args, cfg):
    return tuple(args.n) if args.n else cfg.n_grid


def cmd_bounds(args):
    cfg = _config(args)
    params, rate = cfg.dist, theory.rate_function(cfg.x, cfg.dist, cfg.limit.D)
    lines = ["n\ta_max\tpredicted_log_prob\tlog_lower_bound\tlog_upper_bound"
             "\tlog_upper_full\tclosed_form\tclosed_form_certified\n"]
    for n in _grid(args, cfg):
        wv = realize(cfg.family, n, cfg.tolerance())
        lower, upper = harness.bounds_for(cfg, wv)
        closed = theory.closed_form_upper_bound(wv, cfg.x, params, cfg.bound_config)
        lines.append("\t".join([
            str(n), f"{wv.a_max:.17g}", f"{-rate / wv.a_max ** params.r:.17g}",
            f"{lower.log_lower:.17g}", f"{upper.log_upper:.17g}", f"{upper.log_upper_full:.17g}",
            f"{closed.log_bound:.17g}", str(closed.certified).lower(),
        ]) + "\n")
    _emit("".join(lines), args.out)


def cmd_estimate(args):
    cfg = _config(args)
    names = (args.estimator,) if args.estimator else cfg.estimators
    samples = args.samples or cfg.samples
    lines = ["n\testimator\tp_hat\tstderr\tlog_p_hat\tnormalized_rate\trelative_error"
             "\tsamples\telapsed_seconds\tseed\n"]
    for n in _grid(args, cfg):
        wv = realize(cfg.family, n, cfg.tolerance())
        for name in names:
            seed = args.seed if args.seed is not None else harness.row_seed(cfg.seed, n, name)
            e = ESTIMATORS[name](wv, cfg.x, cfg.dist, samples, seed, args.workers)
            lines.append(f"{n}\t{name}\t{e.p_hat:.17g}\t{e.stderr:.17g}\t{e.log_p_hat:.17g}"
                         f"\t{e.normalized_rate:.17g}\t{e.relative_error:.6g}\t{e.samples}"
                         f"\t{e.elapsed_seconds:.3f}\t{seed}\n")
    _emit("".join(lines), args.out)


def cmd_study(args):
    cfg = _config(args)
    if args.timing:
        cfg = harness.with_overrides(cfg, timing=True)
    report = harness.run_study(cfg, workers=args.workers)
    out = args.out or Path(cfg.output_path)
    harness.write_csv(report.rows, out)
    print(report.summary)
    if args.svg:
        svg = harness.emit_svg(report.rows)
        if svg is not None:
            Path(args.svg).write_text(svg)


def cmd_svg(args):
    try:
        rows = harness.read_csv(args.csv)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read study CSV {args.csv}: {exc}") from exc
    svg = harness.emit_svg(rows)
    if svg is None:
        print(f"notice: {args.csv} has fewer than 2 rows; no SVG written", file=sys.stderr)
        return
    _emit(svg, args.out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stretchsum",
        description="Large deviations of weighted sums of stretched-exponential variables.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tail", help="evaluate P(X > t) = exp(-kappa t^r)")
    _common(p)
    _dist_args(p)
    p.add_argument("t", type=float, nargs="+")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("rate", help="rate function kappa (x - D E[X])^r")
    _common(p)
    _dist_args(p)
    p.add_argument("--x", type=float)
    p.add_argument("--D", type=float)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("bounds", help="certified lower/upper bounds over the n-grid")
    _common(p)
    p.add_argument("--n", type=int, nargs="+", help="override the configured n_grid")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("estimate", help="Monte Carlo estimates over the n-grid")
    _common(p)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--estimator", choices=sorted(ESTIMATORS))
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("study", help="full study: CSV (and optional SVG)")
    _common(p)
    p.add_argument("--svg", type=Path, help="also write a convergence chart")
    p.add_argument("--timing", action="store_true",
                   help="record wall time in the CSV (makes reruns differ)")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("svg", help="render a study CSV as an SVG chart")
    _common(p)
    p.add_argument("csv", type=Path)
    p.set_defaults(func=cmd_svg)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, DomainError, ResourceError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
