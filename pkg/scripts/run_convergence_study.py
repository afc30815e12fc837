#!/usr/bin/env python3
"""Run a convergence study from a config file and write its CSV and SVG chart."""

import argparse
import logging
from pathlib import Path

from stretchsum import harness

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "cramer_study.cfg")
    ap.add_argument("--samples", type=int, help="override the configured sample count")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = harness.with_overrides(harness.load_config(args.config), samples=args.samples)
    report = harness.run_study(cfg, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    stem = Path(cfg.output_path).stem
    harness.write_csv(report.rows, args.out / f"{stem}.csv")
    svg = harness.emit_svg(report.rows)
    if svg is not None:
        (args.out / f"{stem}.svg").write_text(svg)

    print(f"{'n':>6} {'estimator':>13} {'p_hat':>12} {'rel_err':>8} {'normalized':>11}"
          f" {'lower':>9} {'upper':>9}")
    for r in report.rows:
        print(f"{r['n']:>6} {r['estimator']:>13} {r['p_hat']:>12.5g}"
              f" {r['stderr'] / r['p_hat'] if r['p_hat'] else float('inf'):>8.3g}"
              f" {r['normalized_rate']:>11.4f} {r['log_lower_bound']:>9.3f}"
              f" {r['log_upper_bound']:>9.3f}")
    print(report.summary)


if __name__ == "__main__":
    main()
