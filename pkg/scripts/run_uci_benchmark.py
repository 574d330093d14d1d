"""Repeated pure-mode trials on the vendored UCI sets; writes results and a table.

    python scripts/run_uci_benchmark.py --trials 10 --out results/
"""

from __future__ import annotations

import argparse
import logging
import os
import time

from lpfusion.experiment import ExperimentConfig, load_dataset, render_table, run_trials
from lpfusion.fusion import FusionMode

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data", "uci")
DATASETS = ("banknote", "bcw", "glass", "ionosphere", "iris", "vote", "wine")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--datasets", default=",".join(DATASETS))
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--mode", default=FusionMode.PURE_RPAU.value,
                    choices=[m.value for m in FusionMode])
    ap.add_argument("--methods", default="ip,fw")
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    os.makedirs(args.out, exist_ok=True)
    cfg = ExperimentConfig(mode=args.mode, methods=tuple(args.methods.split(",")))
    summaries = {}
    for name in args.datasets.split(","):
        csv_path = os.path.join(DATA, f"{name}.csv")
        if not os.path.exists(csv_path):
            logging.warning("%s: %s missing, skipped (see scripts/prepare_uci_data.py)",
                            name, csv_path)
            continue
        ds = load_dataset(csv_path, os.path.join(DATA, f"{name}.json"))
        t0 = time.perf_counter()
        summaries[name] = run_trials(
            ds, cfg, args.trials, args.seed, args.jobs,
            results_path=os.path.join(args.out, f"{name}_{args.mode}.jsonl"),
            timings_path=os.path.join(args.out, f"{name}_{args.mode}_timings.jsonl"))
        logging.info("%s: %d trials in %.1f s", name, args.trials, time.perf_counter() - t0)
    if not summaries:
        raise SystemExit("no datasets found")
    table = render_table(summaries, metrics=("auc_roc", "auc_pr", "g_mean"))
    with open(os.path.join(args.out, f"table_{args.mode}.txt"), "w") as fh:
        fh.write(table)
    print(table)


if __name__ == "__main__":
    main()
