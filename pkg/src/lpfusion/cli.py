"""Command-line front end: ``lpfusion {fit,eval,bench,ablate,ranktest}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FusionError
from .evaluation import auc_pr, auc_roc, g_mean, read_rank_table, skillings_mack
from .experiment import (TIMING_P, TIMING_TOL, ExperimentConfig, fit_pipeline, format_p,
                         load_dataset, make_splits, predict_scores, render_table, run_trials,
                         timing_ablation, write_timing_csv)
from .fusion import P_GRID, FusionMode
from .kernels import WIDTH_MULTIPLIERS
from .model_io import load_model, save_model

log = logging.getLogger("lpfusion")

MODES = {"pure-rpau": FusionMode.PURE_RPAU, "pure-pseudoneg": FusionMode.PURE_PSEUDONEG,
         "nonpure": FusionMode.NONPURE}


def _floats(text):
    try:
        vals = tuple(_parse_number(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return tuple(int(v) for v in vals)


def _parse_number(tok):
    tok = tok.strip()
    if "/" in tok:
        num, den = tok.split("/")
        return float(num) / float(den)
    return float(tok)


def _schema_for(dataset, schema):
    return schema if schema else str(Path(dataset).with_suffix(".json"))


def _add_data_args(p, multiple=False):
    if multiple:
        p.add_argument("--dataset", action="append", required=True,
                       help="dataset CSV (repeatable)")
        p.add_argument("--schema", action="append", default=None,
                       help="schema JSON per dataset (default: CSV path with .json)")
    else:
        p.add_argument("--dataset", required=True, help="dataset CSV")
        p.add_argument("--schema", default=None,
                       help="schema JSON (default: CSV path with .json)")


def _add_experiment_args(p):
    p.add_argument("--mode", choices=sorted(MODES), default="pure-rpau")
    p.add_argument("--seed", type=int, default=0, help="base seed; trial t uses seed + t")
    p.add_argument("--p-grid", type=_floats, default=P_GRID,
                   help="comma-separated p values, fractions allowed (default: 9-value grid)")
    p.add_argument("--rho-grid", type=_ints, default=tuple(range(1, 11)))
    p.add_argument("--width-multipliers", type=_floats, default=WIDTH_MULTIPLIERS)
    p.add_argument("--gmm-components", type=_ints, default=(1, 2, 3))
    p.add_argument("--kpca-dims", type=_ints, default=None)
    p.add_argument("--methods", default="ip,fw", help="fusion optimizers to run: ip, fw")
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--inner-steps", type=int, default=10)
    p.add_argument("--fw-max-iter", type=int, default=1000)
    p.add_argument("--locality-k", type=int, default=10)
    p.add_argument("--no-locality", action="store_true", help="one global weight vector")
    p.add_argument("--pseudo-fraction", type=float, default=0.5)
    p.add_argument("--anomaly-test-fraction", type=float, default=0.2)
    p.add_argument("--oof-folds", type=int, default=5)


def _experiment_config(args) -> ExperimentConfig:
    return ExperimentConfig(
        mode=MODES[args.mode], p_grid=tuple(args.p_grid), rho_grid=tuple(args.rho_grid),
        width_multipliers=tuple(args.width_multipliers),
        gmm_components=tuple(args.gmm_components),
        kpca_dims=tuple(args.kpca_dims) if args.kpca_dims else None,
        tolerance=args.tolerance, max_epochs=args.max_epochs, inner_steps=args.inner_steps,
        fw_max_iter=args.fw_max_iter, locality_k=args.locality_k,
        locality_enabled=not args.no_locality, pseudo_fraction=args.pseudo_fraction,
        anomaly_test_fraction=args.anomaly_test_fraction, oof_folds=args.oof_folds,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lpfusion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--output-format", choices=("table", "json"), default="table")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common])

    p = add("fit", "fit one split and save the model")
    _add_data_args(p)
    _add_experiment_args(p)
    p.add_argument("--method", choices=("ip", "fw"), default="ip",
                   help="which optimizer's model to save")
    p.add_argument("--output", required=True, help="model file (.npz)")

    p = add("eval", "score a dataset with a saved model")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--test-split", action="store_true",
                   help="score only the test rows of the split drawn with --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--anomaly-test-fraction", type=float, default=0.2)
    p.add_argument("--output", default=None, help="CSV of per-row scores")

    p = add("bench", "repeated trials and a results table")
    _add_data_args(p, multiple=True)
    _add_experiment_args(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument("--output", default=None, help="results JSON-lines file")
    p.add_argument("--table", default=None, help="rendered table file")
    p.add_argument("--timings", default=None, help="per-trial timings JSON-lines file")

    p = add("ablate", "interior-point vs Frank-Wolfe timing table")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-values", type=_floats, default=TIMING_P)
    p.add_argument("--tolerances", type=_floats, default=TIMING_TOL)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--fw-max-iter", type=int, default=20000)
    p.add_argument("--output", default="timing.csv", help="ratio table CSV")
    p.add_argument("--detail", default=None, help="objectives and iteration counts CSV")

    p = add("ranktest", "Skillings-Mack test on a results CSV")
    p.add_argument("--input", required=True, help="CSV, methods as columns, datasets as rows")
    p.add_argument("--lower-is-better", action="store_true")
    p.add_argument("--output", default=None)
    return ap


def _emit(text, path=None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_fit(args):
    args.methods = args.method
    cfg = _experiment_config(args)
    ds = load_dataset(args.dataset, _schema_for(args.dataset, args.schema))
    plan = make_splits(ds, cfg.split_mode, args.seed,
                       anomaly_test_fraction=cfg.anomaly_test_fraction)
    fitted, ctx = fit_pipeline(ds, plan, cfg, args.seed)
    model = fitted[args.method]
    save_model(model, args.output)
    info = {"dataset": ds.name, "seed": args.seed, "method": args.method,
            "threshold": model.threshold, "hyperparameters": ctx["hyper"]}
    if args.output_format == "json":
        _emit(json.dumps(info, sort_keys=True, default=float) + "\n")
    else:
        hyper = ", ".join(f"{k}={v}" for k, v in sorted(ctx["hyper"].items()))
        _emit(f"saved {args.output} ({ds.name}, seed {args.seed})\n{hyper}\n")


def _cmd_eval(args):
    model = load_model(args.model)
    ds = load_dataset(args.dataset, _schema_for(args.dataset, args.schema))
    rows = np.arange(len(ds.labels))
    if args.test_split:
        split_mode = "nonpure" if model.mode is FusionMode.NONPURE else "pure"
        rows = make_splits(ds, split_mode, args.seed,
                           anomaly_test_fraction=args.anomaly_test_fraction).test
    scores = predict_scores(model, ds.features[rows])
    labels = ds.labels[rows]
    out = {"n": int(rows.size), "threshold": model.threshold}
    if np.any(labels == 1) and np.any(labels == -1):
        out.update(auc_roc=auc_roc(scores, labels), auc_pr=auc_pr(scores, labels),
                   g_mean=g_mean(scores, labels, model.threshold))
    if args.output:
        with open(args.output, "w") as fh:
            fh.write("row,score,label,predicted_normal\n")
            for r, s, y in zip(rows, scores, labels):
                fh.write(f"{r},{s!r},{y},{int(s >= model.threshold)}\n")
    if args.output_format == "json":
        _emit(json.dumps(out, sort_keys=True) + "\n")
    else:
        _emit("".join(f"{k:10s} {v:.4f}\n" if isinstance(v, float) else f"{k:10s} {v}\n"
                      for k, v in out.items()))


def _cmd_bench(args):
    cfg = _experiment_config(args)
    schemas = args.schema or [None] * len(args.dataset)
    if len(schemas) != len(args.dataset):
        raise _UsageError("--schema must be given once per --dataset or not at all")
    summaries = {}
    multi = len(args.dataset) > 1
    for i, (path, schema) in enumerate(zip(args.dataset, schemas)):
        ds = load_dataset(path, _schema_for(path, schema))
        res = _suffixed(args.output, ds.name, multi)
        tim = _suffixed(args.timings, ds.name, multi)
        summaries[ds.name] = run_trials(ds, cfg, args.trials, args.seed, args.jobs, res, tim)
    if args.output_format == "json":
        text = json.dumps({k: {"mean": s.mean, "std": s.std} for k, s in summaries.items()},
                          sort_keys=True, indent=2) + "\n"
    else:
        text = render_table(summaries, metrics=("auc_roc", "auc_pr", "g_mean"))
    if args.table:
        Path(args.table).write_text(text)
    _emit(text)


def _suffixed(path, name, multi):
    if path is None or not multi:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{name}{p.suffix}"))


def _cmd_ablate(args):
    cells = timing_ablation(args.p_values, args.tolerances, n=args.n, d=args.d, seed=args.seed,
                            fw_max_iter=args.fw_max_iter, repeats=args.repeats)
    write_timing_csv(cells, args.output, args.detail)
    if args.output_format == "json":
        _emit(json.dumps([{"p": format_p(c.p), "tolerance": c.tolerance, "ratio": c.ratio,
                           "fw_converged": c.fw_converged} for c in cells], indent=2) + "\n")
    else:
        _emit(Path(args.output).read_text())


def _cmd_ranktest(args):
    table = read_rank_table(args.input, higher_is_better=not args.lower_is_better)
    res = skillings_mack(table)
    ranks = dict(zip(table.methods, (float(r) for r in res.mean_ranks)))
    if args.output_format == "json":
        text = json.dumps({"statistic": res.statistic, "p_value": res.p_value, "df": res.df,
                           "mean_ranks": ranks}, indent=2) + "\n"
    else:
        lines = [f"statistic {res.statistic:.6f}  df {res.df}  p-value {res.p_value:.6g}"]
        lines += [f"{m:20s} {r:.3f}" for m, r in sorted(ranks.items(), key=lambda kv: kv[1])]
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    if args.output:
        sys.stdout.write(text)


class _UsageError(Exception):
    pass


COMMANDS = {"fit": _cmd_fit, "eval": _cmd_eval, "bench": _cmd_bench, "ablate": _cmd_ablate,
            "ranktest": _cmd_ranktest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lpfusion: error: {exc}", file=sys.stderr)
        return 2
    except (FusionError, OSError, ValueError) as exc:
        print(f"lpfusion: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
