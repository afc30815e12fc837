#!/usr/bin/env python3
"""Relative error of naive and largest-jump Monte Carlo at equal sample budgets."""

import argparse

from stretchsum import dist
from stretchsum.mc import largest_jump_mc, naive_mc
from stretchsum.weights import WeightVector


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weights", type=float, nargs="+", default=[0.6, 0.4])
    ap.add_argument("--x", type=float, nargs="+", default=[4, 8, 16, 32, 64, 128])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    params = dist.StretchedExpParams(1.0, 0.5)
    wv = WeightVector(1, args.weights)
    print(f"{'x':>6} {'p_hat':>12} {'rel_err naive':>14} {'rel_err jump':>13}")
    for x in args.x:
        nv = naive_mc(wv, x, params, args.samples, args.seed)
        lj = largest_jump_mc(wv, x, params, args.samples, args.seed)
        print(f"{x:>6g} {lj.p_hat:>12.4g} {nv.relative_error:>14.3g} {lj.relative_error:>13.3g}")


if __name__ == "__main__":
    main()
