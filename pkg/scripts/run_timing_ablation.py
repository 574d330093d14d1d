"""FW/IP wall-clock ratios on a synthetic fusion problem, one row per p.

    python scripts/run_timing_ablation.py --out results/
"""

from __future__ import annotations

import argparse
import os

from lpfusion.experiment import TIMING_P, TIMING_TOL, format_p, timing_ablation, write_timing_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--fw-max-iter", type=int, default=20000)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    os.makedirs(args.out, exist_ok=True)
    cells = timing_ablation(TIMING_P, TIMING_TOL, n=args.n, d=args.d, seed=args.seed,
                            fw_max_iter=args.fw_max_iter, repeats=args.repeats)
    write_timing_csv(cells, os.path.join(args.out, "timing.csv"),
                     os.path.join(args.out, "timing_detail.csv"))
    print(f"{'p':>6} {'tol':>7} {'IP s':>9} {'FW s':>9} {'FW/IP':>8}  IP epochs  FW iters")
    for c in cells:
        flag = "" if c.fw_converged else " (FW capped)"
        print(f"{format_p(c.p):>6} {c.tolerance:>7g} {c.ip_seconds:9.4f} {c.fw_seconds:9.4f} "
              f"{c.ratio:8.3f}  {c.ip_epochs:9d}  {c.fw_iterations:8d}{flag}")


if __name__ == "__main__":
    main()
