#!/usr/bin/env python3
"""Sweep the worst relative slack of the two space inequalities over p.

The c_r table is conservative, so the observed worst margins say how much
slack the constants leave on random data (they make no sharpness claim).
Writes one CSV row per p with the minimal relative residual of the weighted
convexity inequality and of the midpoint inequality.

Usage:
    python scripts/convexity_margins.py --samples 200000 --out margins.csv
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from firmlp.space import (  # noqa: E402
    ball_inequality_residual,
    convexity_residual,
    norm_pow,
    space_params,
)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="convexity_margins.csv")
    ap.add_argument(
        "--p-grid", default="1.1,1.25,1.5,1.75,2.0,2.5,3.0,4.0,6.0,8.0",
        help="comma-separated p values",
    )
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    rows = []
    for p in (float(v) for v in args.p_grid.split(",")):
        sp = space_params(p)
        x = rng.uniform(-10, 10, size=(args.samples, args.dim))
        y = rng.uniform(-10, 10, size=(args.samples, args.dim))
        w = rng.uniform(0, 1, size=args.samples)
        scale = np.maximum(np.maximum(norm_pow(x, sp), norm_pow(y, sp)), 1.0)
        conv = float(np.min(convexity_residual(x, y, w, sp) / scale))
        ball = float(np.min(ball_inequality_residual(x, y, sp) / scale))
        rows.append((p, sp.r, sp.c_r, conv, ball))
        print(f"p={p:<5} r={sp.r:<5} c_r={sp.c_r:.6f}  "
              f"min convexity slack {conv:+.3e}  min midpoint slack {ball:+.3e}")

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("p,r,c_r,min_convexity_slack,min_midpoint_slack\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
