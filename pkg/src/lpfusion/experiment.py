"""Datasets, split protocols, grid search, repeated trials and the timing ablation."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import base_learners as bl
from .errors import (DataIOError, FusionError, InsufficientData, InvalidInput, ParseError,
                     RunFailed, UndefinedMetric)
from .evaluation import (auc_pr, auc_roc, best_gmean_threshold, g_mean, mean_std, rpau_score,
                         select_threshold)
from .fusion import (P_GRID, FusionInput, FusionMode, FusionModel, OptimizerConfig,
                     baseline_fuse, deployment_weights, fuse_scores, optimize_frank_wolfe,
                     optimize_interior_point, prepare_fusion_input)
from .kernels import WIDTH_MULTIPLIERS, kernel_grid
from .scorespace import (ScoreMatrix, Stage, apply_zscore, fit_trimmed_range, fit_zscore,
                         generate_pseudo_negatives, pseudo_negative_rows)

log = logging.getLogger(__name__)

MISSING_TOKENS = {"", "?", "na", "nan", "null"}
LEARNER_ORDER = ("GMM", "SVDD", "OCGP", "KPCA")
TIMING_P = (32 / 31, 8 / 7, 2.0, 100.0)
TIMING_TOL = (1e-2, 1e-3, 1e-4)


# --------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray              # +1 normal, -1 anomalous
    feature_names: list[str]
    provenance: str = ""
    rejected_rows: int = 0

    @property
    def n_normal(self) -> int:
        return int(np.sum(self.labels == 1))

    @property
    def n_anomalous(self) -> int:
        return int(np.sum(self.labels == -1))


def _load_schema(schema) -> dict:
    if isinstance(schema, dict):
        return schema
    try:
        with open(schema) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataIOError(f"cannot read schema {schema}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"schema {schema} is not valid JSON: {exc}") from exc


def minmax_fit(X):
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    return lo, np.where(span > 0, span, 1.0)


def minmax_apply(X, lo, span):
    return (X - lo) / span


def load_dataset(path, schema, scale: bool = False) -> Dataset:
    """Read a CSV with a header row into a :class:`Dataset`.

    ``schema`` (dict or JSON path) names ``label_column`` and ``normal_value``
    and may list ``feature_columns``, the allowed ``classes`` and ``expected``
    counts.  Rows holding a missing-value token are dropped and counted.  The
    experiment pipeline scales features on training rows only; pass
    ``scale=True`` to min-max scale the full matrix here instead.
    """
    sch = _load_schema(schema)
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    label_col = sch.get("label_column")
    if label_col not in header:
        raise ParseError(f"{path}: label column {label_col!r} not in header")
    normal = str(sch.get("normal_value"))
    feat_cols = sch.get("feature_columns") or [h for h in header if h != label_col]
    missing = [c for c in feat_cols if c not in header]
    if missing:
        raise ParseError(f"{path}: feature columns {missing} not in header")
    f_idx = [header.index(c) for c in feat_cols]
    l_idx = header.index(label_col)
    allowed = {str(c) for c in sch["classes"]} if "classes" in sch else None

    feats, labels, rejected = [], [], 0
    for r_no, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{r_no}: expected {len(header)} cells, got {len(row)}")
        cells = [row[i].strip() for i in f_idx]
        if any(c.lower() in MISSING_TOKENS for c in cells) or row[l_idx].strip() == "":
            rejected += 1
            continue
        vals = []
        for c_name, cell in zip(feat_cols, cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r_no}, column {c_name!r}: non-numeric "
                                 f"value {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {r_no}, column {c_name!r}: non-finite value")
            vals.append(v)
        lab = row[l_idx].strip()
        if allowed is not None and lab not in allowed:
            raise ParseError(f"{path}: row {r_no}: label {lab!r} is not one of {sorted(allowed)}")
        feats.append(vals)
        labels.append(1 if lab == normal else -1)
    if not feats:
        raise ParseError(f"{path}: no usable rows")
    X = np.array(feats, dtype=float)
    y = np.array(labels, dtype=int)
    if scale:
        X = minmax_apply(X, *minmax_fit(X))
    ds = Dataset(name=sch.get("name", path.stem), features=X, labels=y,
                 feature_names=list(feat_cols), provenance=sch.get("provenance", ""),
                 rejected_rows=rejected)
    exp = sch.get("expected")
    if exp:
        got = {"n": len(y), "normals": ds.n_normal, "features": X.shape[1]}
        bad = {k: (exp[k], got[k]) for k in exp if k in got and exp[k] != got[k]}
        if bad:
            raise ParseError(f"{path}: counts differ from schema (expected, got): {bad}")
    if rejected:
        log.info("%s: rejected %d rows with missing values", path.name, rejected)
    return ds


# --------------------------------------------------------------------------
# splits


class SplitMode(str, Enum):
    PURE = "pure"
    NONPURE = "nonpure"


@dataclass(frozen=True)
class SplitPlan:
    mode: SplitMode
    seed: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def make_splits(dataset: Dataset, mode="pure", seed: int = 0,
                ratios=(0.7, 0.2, 0.1), anomaly_test_fraction: float = 0.2) -> SplitPlan:
    mode = SplitMode(mode)
    rng = np.random.default_rng(seed)
    normals = np.flatnonzero(dataset.labels == 1)
    anomalies = np.flatnonzero(dataset.labels == -1)
    if normals.size < 10:
        raise InsufficientData(f"need at least 10 normal samples, got {normals.size}")
    if anomalies.size == 0:
        raise InsufficientData("the test split needs anomalous samples")
    normals = rng.permutation(normals)
    n_tr = int(round(ratios[0] * normals.size))
    n_va = int(round(ratios[1] * normals.size))
    tr, va, te = normals[:n_tr], normals[n_tr:n_tr + n_va], normals[n_tr + n_va:]
    if mode is SplitMode.PURE:
        te = np.concatenate([te, anomalies])
    else:
        if anomalies.size < 3:
            raise InsufficientData("non-pure splits need at least 3 anomalies")
        anomalies = rng.permutation(anomalies)
        n_te = max(1, int(round(anomaly_test_fraction * anomalies.size)))
        rest = anomalies[n_te:]
        half = int(round(rest.size / 2))
        tr = np.concatenate([tr, rest[:half]])
        va = np.concatenate([va, rest[half:]])
        te = np.concatenate([te, anomalies[:n_te]])
    return SplitPlan(mode=mode, seed=seed, train=np.sort(tr), val=np.sort(va), test=np.sort(te))


# --------------------------------------------------------------------------
# grid search


@dataclass
class GridResult:
    best: dict
    score: float
    scores: dict


def grid_search(grid: dict, evaluate: Callable[[dict], float]) -> GridResult:
    """Exhaustive argmax over the Cartesian grid.

    Ties go to the lexicographically smallest value tuple (keys in the order
    given).  Configurations whose criterion is undefined score ``-inf``.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise InvalidInput("grid must be non-empty")
    keys = list(grid)
    scores = {}
    best_t, best_s = None, -math.inf
    for combo in sorted(itertools.product(*(grid[k] for k in keys))):
        cfg = dict(zip(keys, combo))
        try:
            s = float(evaluate(cfg))
        except (UndefinedMetric, InsufficientData):
            s = -math.inf
        if not math.isfinite(s) and s != -math.inf:
            s = -math.inf
        scores[combo] = s
        if best_t is None or s > best_s:
            best_t, best_s = combo, s
    return GridResult(best=dict(zip(keys, best_t)), score=best_s, scores=scores)


# --------------------------------------------------------------------------
# one trial


class Criterion(str, Enum):
    RPAU = "rpau"
    PSEUDO_NEG_GMEAN = "pseudo_neg_gmean"
    NONPURE_VAL_AUC = "nonpure_val_auc"


MODE_CRITERION = {
    FusionMode.PURE_RPAU: Criterion.RPAU,
    FusionMode.PURE_PSEUDONEG: Criterion.PSEUDO_NEG_GMEAN,
    FusionMode.NONPURE: Criterion.NONPURE_VAL_AUC,
}


@dataclass(frozen=True)
class ExperimentConfig:
    mode: FusionMode = FusionMode.PURE_RPAU
    p_grid: tuple = P_GRID
    rho_grid: tuple = tuple(range(1, 11))
    width_multipliers: tuple = WIDTH_MULTIPLIERS
    gmm_components: tuple = (1, 2, 3)
    kpca_dims: tuple | None = None      # None: 2, 6, 10, ... up to n_train
    fusion_input: FusionInput = FusionInput.NORMALIZED
    tolerance: float = 1e-3
    max_epochs: int = 200
    inner_steps: int = 10
    fw_max_iter: int = 1000
    locality_k: int = 10
    locality_enabled: bool = True
    pseudo_fraction: float = 0.5
    anomaly_test_fraction: float = 0.2
    learner_rho: int = 5                # trimmed range used when ranking single learners by RPAU
    oof_folds: int = 5                  # out-of-fold scoring of training normals; <= 1 scores in-sample
    methods: tuple = ("ip", "fw")

    def __post_init__(self):
        object.__setattr__(self, "mode", FusionMode(self.mode))
        object.__setattr__(self, "fusion_input", FusionInput(self.fusion_input))
        for name in ("p_grid", "rho_grid", "width_multipliers", "gmm_components", "methods"):
            if len(getattr(self, name)) == 0:
                raise InvalidInput(f"{name} must be non-empty")
        bad = [m for m in self.methods if m not in ("ip", "fw")]
        if bad:
            raise InvalidInput(f"unknown fusion methods {bad}")

    @property
    def criterion(self) -> Criterion:
        return MODE_CRITERION[self.mode]

    @property
    def split_mode(self) -> SplitMode:
        return SplitMode.NONPURE if self.mode is FusionMode.NONPURE else SplitMode.PURE

    def optimizer(self, p) -> OptimizerConfig:
        return OptimizerConfig(p_base=p, tolerance=self.tolerance, max_epochs=self.max_epochs,
                               inner_steps=self.inner_steps, locality_k=self.locality_k,
                               locality_enabled=self.locality_enabled)


@dataclass
class TrialResult:
    seed: int
    hyperparameters: dict
    metrics: dict            # method -> {auc_roc, auc_pr, g_mean, threshold}
    timings: dict = field(default_factory=dict)
    error: str | None = None

    def record(self) -> dict:
        """Deterministic part of the trial (timings excluded)."""
        return {"seed": self.seed, "hyperparameters": self.hyperparameters,
                "metrics": self.metrics, "error": self.error}


def _learner_score(criterion, val_raw, train_raw, val_labels, learner_rho, seed):
    if criterion is Criterion.RPAU:
        return rpau_score(val_raw, learner_rho)[0]
    if criterion is Criterion.PSEUDO_NEG_GMEAN:
        mu, sd = train_raw.mean(), max(train_raw.std(), 1e-12)
        S = ScoreMatrix(((val_raw - mu) / sd)[:, None], ("l",), Stage.ZSCORED)
        stacked, labels = generate_pseudo_negatives(S, 0.5, seed)
        return best_gmean_threshold(stacked.values[:, 0], labels)[1]
    return auc_roc(val_raw, val_labels)


def _candidates(kind, X_fit, X_evals, kernels, dims, comps, seed):
    """Fit every grid candidate of one learner kind and score each array in ``X_evals``.

    Returns ``{key: (model, [scores, ...])}``.
    """
    out = {}
    if kind in ("SVDD", "OCGP"):
        for k in kernels:
            m = bl.fit_base_learner(bl.BaseLearnerSpec(kind, k), X_fit)
            out[(k.width_multiplier,)] = (m, [bl.score_samples(m, X) for X in X_evals])
    elif kind == "KPCA":
        top = min(max(dims), X_fit.shape[0])
        for k in kernels:
            full = bl.fit_base_learner(bl.BaseLearnerSpec(kind, k, kpca_subspace_dim=top), X_fit)
            errs = [full.reconstruction_error(X, dims) for X in X_evals]
            for j, d in enumerate(dims):
                out[(k.width_multiplier, d)] = (full.truncated(min(d, top)),
                                                [-e[:, j] for e in errs])
    else:
        for c in comps:
            if c > X_fit.shape[0]:
                continue
            m = bl.fit_base_learner(bl.BaseLearnerSpec(kind, gmm_components=c, seed=seed), X_fit)
            out[(c,)] = (m, [bl.score_samples(m, X) for X in X_evals])
    return out


def _fold_ids(n, n_folds, seed):
    return np.random.default_rng(seed).permutation(n) % n_folds


def _fit_learners(cfg: ExperimentConfig, X_fit, X_va, y_va, X_extra, seed):
    """Select each learner's hyperparameters on validation data.

    Training-normal scores are computed out-of-fold so that their spread
    matches held-out scores; ``X_extra`` (training anomalies, may be empty)
    is scored by the model fitted on all training normals.

    Returns models, chosen hyperparameters, each learner's criterion value and
    the raw score columns for the training normals and for ``X_extra``.
    """
    crit = cfg.criterion
    models, hyper, crit_vals, fit_cols, extra_cols = {}, {}, {}, {}, {}
    kernels = kernel_grid(X_fit, cfg.width_multipliers)
    n_fit = X_fit.shape[0]
    dims = [d for d in (cfg.kpca_dims or bl.kpca_dim_grid(n_fit)) if d <= n_fit] or [n_fit]
    folds = _fold_ids(n_fit, cfg.oof_folds, seed) if cfg.oof_folds > 1 else None
    names = {"SVDD": ("svdd_width",), "OCGP": ("gp_width",),
             "KPCA": ("kpca_width", "kpca_dim"), "GMM": ("gmm_components",)}

    for kind in LEARNER_ORDER:
        full = _candidates(kind, X_fit, [X_va, X_extra], kernels, dims, cfg.gmm_components, seed)
        if folds is None:
            tr_scores = {key: sc for key, (m, _) in full.items()
                         for sc in [bl.score_samples(m, X_fit)]}
        else:
            tr_scores = {key: np.empty(n_fit) for key in full}
            for f in range(cfg.oof_folds):
                hold = folds == f
                part = _candidates(kind, X_fit[~hold], [X_fit[hold]], kernels, dims,
                                   cfg.gmm_components, seed)
                for key in full:
                    tr_scores[key][hold] = part[key][1][0]
        best = None
        for key in sorted(full):
            try:
                sc = _learner_score(crit, full[key][1][0], tr_scores[key], y_va,
                                    cfg.learner_rho, seed)
            except (UndefinedMetric, InsufficientData):
                sc = -math.inf
            if best is None or sc > best[0]:
                best = (sc, key)
        sc, key = best
        models[kind], crit_vals[kind] = full[key][0], sc
        fit_cols[kind], extra_cols[kind] = tr_scores[key], full[key][1][1]
        hyper.update(zip(names[kind], key))
    return models, hyper, crit_vals, fit_cols, extra_cols


def _raw_scores(models, X):
    return ScoreMatrix(np.column_stack([bl.score_samples(models[k], X) for k in LEARNER_ORDER]),
                       LEARNER_ORDER, Stage.RAW)


@dataclass
class _FusionData:
    norm0: object
    Z_tr: ScoreMatrix
    Z_va: ScoreMatrix
    X_tr: np.ndarray
    X_va: np.ndarray
    y_tr: np.ndarray
    y_va: np.ndarray
    Z_ps: ScoreMatrix | None = None     # validation plus pseudo-negatives
    X_ps: np.ndarray | None = None
    y_ps: np.ndarray | None = None


def _fusion_criterion(cfg, fd, model, rho):
    crit = cfg.criterion
    if crit is Criterion.RPAU:
        return rpau_score(fuse_scores(model, fd.Z_va, fd.X_va), rho)[0]
    if crit is Criterion.PSEUDO_NEG_GMEAN:
        return best_gmean_threshold(fuse_scores(model, fd.Z_ps, fd.X_ps), fd.y_ps)[1]
    return auc_roc(fuse_scores(model, fd.Z_va, fd.X_va), fd.y_va)


def _threshold(cfg, scores_va, y_va, rho, scores_ps=None, y_ps=None):
    crit = cfg.criterion
    if crit is Criterion.RPAU:
        return select_threshold(scores_va, None, "rpau", rho)
    if crit is Criterion.PSEUDO_NEG_GMEAN:
        return select_threshold(scores_ps, y_ps, "pseudo_neg_gmean")
    return select_threshold(scores_va, y_va, "pseudo_neg_gmean")


def _metrics(scores, labels, threshold):
    return {"auc_roc": auc_roc(scores, labels), "auc_pr": auc_pr(scores, labels),
            "g_mean": g_mean(scores, labels, threshold), "threshold": float(threshold)}


def _train_fusion(cfg, fd, norm, method, p):
    S_in = prepare_fusion_input(norm, fd.Z_tr, cfg.fusion_input)
    if method == "ip":
        res = optimize_interior_point(S_in, fd.X_tr, fd.y_tr, cfg.optimizer(p))
        res.weights = deployment_weights(res.weights, S_in, fd.y_tr)
    else:
        res = optimize_frank_wolfe(S_in, fd.y_tr, p, cfg.optimizer(p), max_iter=cfg.fw_max_iter)
    return res


def fit_pipeline(dataset: Dataset, plan: SplitPlan, cfg: ExperimentConfig, seed: int):
    """Fit learners, normalizer and fusion weights on one split.

    Returns ``(models_by_method, context)`` where each model is a trained
    :class:`FusionModel` and ``context`` carries what evaluation needs.
    """
    timings = {}
    t0 = time.perf_counter()
    X, y = dataset.features, dataset.labels
    lo, span = minmax_fit(X[plan.train])
    hi = X[plan.train].max(axis=0)
    Xs = minmax_apply(X, lo, span)
    is_norm = y[plan.train] == 1
    X_tr, y_tr = Xs[plan.train], y[plan.train].astype(float)
    X_fit = X_tr[is_norm]
    X_va, y_va = Xs[plan.val], y[plan.val].astype(float)
    timings["split"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    models, hyper, crit_vals, fit_cols, extra_cols = _fit_learners(
        cfg, X_fit, X_va, y_va, X_tr[~is_norm], seed)
    timings["learners"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    R_fit = ScoreMatrix(np.column_stack([fit_cols[k] for k in LEARNER_ORDER]), LEARNER_ORDER)
    R_tr = np.empty((X_tr.shape[0], len(LEARNER_ORDER)))
    R_tr[is_norm] = R_fit.values
    if np.any(~is_norm):
        R_tr[~is_norm] = np.column_stack([extra_cols[k] for k in LEARNER_ORDER])
    norm0 = fit_zscore(R_fit)
    Z_fit = apply_zscore(norm0, R_fit)
    Z_tr = apply_zscore(norm0, ScoreMatrix(R_tr, LEARNER_ORDER))
    Z_va = apply_zscore(norm0, _raw_scores(models, X_va))
    fd = _FusionData(norm0=norm0, Z_tr=Z_tr, Z_va=Z_va, X_tr=X_tr, X_va=X_va, y_tr=y_tr,
                     y_va=y_va)
    if cfg.criterion is Criterion.PSEUDO_NEG_GMEAN:
        fd.Z_ps, fd.y_ps = generate_pseudo_negatives(Z_va, cfg.pseudo_fraction, seed)
        # pseudo-negatives keep the features of the rows they mirror
        src = pseudo_negative_rows(Z_va.n, cfg.pseudo_fraction, seed)
        fd.X_ps = np.vstack([X_va, X_va[src]])

    fitted = {}
    for method in cfg.methods:
        cache = {}

        def evaluate(c, method=method, cache=cache):
            p, rho = c["p"], c["rho"]
            norm = fit_trimmed_range(norm0, Z_fit, rho)
            key = (p, rho) if cfg.fusion_input is FusionInput.NORMALIZED else p
            if key not in cache:
                cache[key] = _train_fusion(cfg, fd, norm, method, p)
            res = cache[key]
            model = FusionModel(learners=tuple(models[k] for k in LEARNER_ORDER),
                                learner_ids=LEARNER_ORDER, normalizer=norm,
                                weight_set=res.weights, threshold=0.0, mode=cfg.mode,
                                fusion_input=cfg.fusion_input, config=cfg.optimizer(p),
                                feature_min=lo, feature_max=hi)
            return _fusion_criterion(cfg, fd, model, rho)

        gr = grid_search({"p": list(cfg.p_grid), "rho": list(cfg.rho_grid)}, evaluate)
        p, rho = gr.best["p"], gr.best["rho"]
        norm = fit_trimmed_range(norm0, Z_fit, rho)
        key = (p, rho) if cfg.fusion_input is FusionInput.NORMALIZED else p
        res = cache[key]
        model = FusionModel(learners=tuple(models[k] for k in LEARNER_ORDER),
                            learner_ids=LEARNER_ORDER, normalizer=norm, weight_set=res.weights,
                            threshold=0.0, mode=cfg.mode, fusion_input=cfg.fusion_input,
                            config=cfg.optimizer(p), feature_min=lo, feature_max=hi)
        f_va = fuse_scores(model, Z_va, X_va)
        f_ps = fuse_scores(model, fd.Z_ps, fd.X_ps) if fd.Z_ps is not None else None
        model.threshold = _threshold(cfg, f_va, y_va, rho, f_ps, fd.y_ps)
        fitted[method] = model
        hyper[f"{method}_p"] = p
        hyper[f"{method}_rho"] = rho
        hyper[f"{method}_criterion"] = gr.score
        hyper[f"{method}_epochs"] = res.epochs
    timings["fusion"] = time.perf_counter() - t0

    single_best = max(LEARNER_ORDER, key=lambda k: (crit_vals[k], -LEARNER_ORDER.index(k)))
    hyper["single_best"] = single_best
    ctx = {"hyper": hyper, "timings": timings, "fd": fd, "scale": (lo, span),
           "rho_base": hyper.get(f"{cfg.methods[0]}_rho", cfg.learner_rho), "models": models}
    return fitted, ctx


def predict_scores(model: FusionModel, X_raw) -> np.ndarray:
    """Fused scores for unscaled feature rows, using the scaling stored in the model."""
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim != 2:
        raise InvalidInput("features must be a 2-d array")
    if model.feature_min is None or model.feature_max is None:
        raise InvalidInput("model carries no feature scaling")
    lo = model.feature_min
    span = model.feature_max - lo
    X = minmax_apply(X_raw, lo, np.where(span > 0, span, 1.0))
    R = ScoreMatrix(np.column_stack([bl.score_samples(m, X) for m in model.learners]),
                    model.learner_ids, Stage.RAW)
    return fuse_scores(model, apply_zscore(model.normalizer, R), X)


def run_trial(dataset: Dataset, cfg: ExperimentConfig, seed: int) -> TrialResult:
    plan = make_splits(dataset, cfg.split_mode, seed, anomaly_test_fraction=cfg.anomaly_test_fraction)
    fitted, ctx = fit_pipeline(dataset, plan, cfg, seed)
    t0 = time.perf_counter()
    fd = ctx["fd"]
    lo, span = ctx["scale"]
    X_te = minmax_apply(dataset.features[plan.test], lo, span)
    y_te = dataset.labels[plan.test]
    Z_te = apply_zscore(fd.norm0, _raw_scores(ctx["models"], X_te))
    metrics = {}
    for method, model in fitted.items():
        metrics[f"pure_{method}" if cfg.mode is not FusionMode.NONPURE else f"nonpure_{method}"] = \
            _metrics(fuse_scores(model, Z_te, X_te), y_te, model.threshold)

    # baselines share the learners; thresholds follow the same strategy
    rho = ctx["rho_base"]
    Z_ps = fd.Z_ps
    base = {"sum": lambda Z: baseline_fuse(Z, "sum")}
    for j, k in enumerate(LEARNER_ORDER):
        base[k.lower()] = (lambda Z, j=j: baseline_fuse(Z, "single_best", j))
    sb = LEARNER_ORDER.index(ctx["hyper"]["single_best"])
    base["single_best"] = lambda Z: baseline_fuse(Z, "single_best", sb)
    for name, fn in base.items():
        thr = _threshold(cfg, fn(fd.Z_va), fd.y_va, rho,
                         fn(Z_ps) if Z_ps is not None else None, fd.y_ps)
        metrics[name] = _metrics(fn(Z_te), y_te, thr)
    timings = dict(ctx["timings"], evaluation=time.perf_counter() - t0)
    return TrialResult(seed=seed, hyperparameters=ctx["hyper"], metrics=metrics, timings=timings)


def _trial_job(args):
    dataset, cfg, seed = args
    try:
        return run_trial(dataset, cfg, seed)
    except (FusionError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return TrialResult(seed=seed, hyperparameters={}, metrics={},
                           error=f"{type(exc).__name__}: {exc}")


# --------------------------------------------------------------------------
# repeated trials


@dataclass
class TrialSummary:
    dataset: str
    mode: str
    trials: list[TrialResult]
    mean: dict        # method -> metric -> mean
    std: dict

    def table(self) -> str:
        return render_table({self.dataset: self})


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def aggregate(trials: Sequence[TrialResult]) -> tuple[dict, dict]:
    ok = sorted((t for t in trials if t.error is None), key=lambda t: t.seed)
    mean, std = {}, {}
    if not ok:
        return mean, std
    for method in ok[0].metrics:
        mean[method], std[method] = {}, {}
        for metric in ok[0].metrics[method]:
            m, s = mean_std([t.metrics[method][metric] for t in ok])
            mean[method][metric], std[method][metric] = m, s
    return mean, std


def run_trials(dataset: Dataset, cfg: ExperimentConfig | None = None, n_trials: int = 10,
               base_seed: int = 0, jobs: int = 1, results_path=None,
               timings_path=None) -> TrialSummary:
    """Run ``n_trials`` trials with seeds ``base_seed + t``."""
    cfg = cfg or ExperimentConfig()
    if n_trials < 1:
        raise InvalidInput("n_trials must be at least 1")
    work = [(dataset, cfg, base_seed + t) for t in range(n_trials)]
    if jobs > 1 and n_trials > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, n_trials)) as ex:
            trials = list(ex.map(_trial_job, work))
    else:
        trials = [_trial_job(w) for w in work]
    trials.sort(key=lambda t: t.seed)
    failed = [t for t in trials if t.error is not None]
    for t in failed:
        log.warning("trial seed=%d failed: %s", t.seed, t.error)
    if len(failed) * 2 > n_trials:
        raise RunFailed(f"{len(failed)} of {n_trials} trials failed; first error: {failed[0].error}")
    mean, std = aggregate(trials)
    summary = TrialSummary(dataset=dataset.name, mode=cfg.mode.value, trials=trials,
                           mean=mean, std=std)
    if results_path is not None:
        write_results(summary, results_path)
    if timings_path is not None:
        with open(timings_path, "w") as fh:
            for t in trials:
                fh.write(json.dumps({"seed": t.seed, "timings": t.timings}, sort_keys=True) + "\n")
    return summary


def write_results(summary: TrialSummary, path) -> None:
    with open(path, "w") as fh:
        for t in summary.trials:
            rec = dict(t.record(), dataset=summary.dataset, mode=summary.mode)
            fh.write(json.dumps(_to_jsonable(rec), sort_keys=True) + "\n")


TABLE_COLUMNS = (("pure_fw", "Pure1"), ("pure_ip", "Pure2"), ("gmm", "GMM"), ("svdd", "SVDD"),
                 ("ocgp", "GP"), ("kpca", "KPCA"), ("sum", "Sum rule"),
                 ("single_best", "Single-best"))


def render_table(summaries: dict, metrics=("auc_roc", "g_mean")) -> str:
    """Datasets as rows, methods as columns, one block per metric, mean±std%."""
    first = next(iter(summaries.values()))
    nonpure = first.mode == FusionMode.NONPURE.value
    cols = [(k.replace("pure_", "nonpure_") if nonpure else k, lab) for k, lab in TABLE_COLUMNS]
    cols = [(k, lab) for k, lab in cols if any(k in s.mean for s in summaries.values())]
    lines = []
    for metric in metrics:
        head = [f"{metric}", *(lab for _, lab in cols)]
        rows = [head]
        for name, s in summaries.items():
            row = [name]
            for k, _ in cols:
                if k in s.mean:
                    row.append(f"{100 * s.mean[k][metric]:.2f}±{100 * s.std[k][metric]:.2f}")
                else:
                    row.append("-")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        for r in rows:
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
        lines.append("")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# timing ablation


def synthetic_fusion_problem(n, d, seed):
    """Two-class z-scored score matrix with learners of decreasing strength."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    strength = np.linspace(1.5, 0.3, d) if d > 1 else np.array([1.5])
    S = y[:, None] * strength[None, :] + rng.normal(size=(n, d))
    S = (S - S.mean(axis=0)) / S.std(axis=0)
    return S, y


@dataclass
class TimingCell:
    p: float
    tolerance: float
    ip_seconds: float
    fw_seconds: float
    ip_objective: float
    fw_objective: float
    ip_converged: bool
    fw_converged: bool
    ip_epochs: int
    fw_iterations: int

    @property
    def ratio(self) -> float:
        return self.fw_seconds / self.ip_seconds


def _time_call(fn, repeats):
    best, out = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def timing_ablation(p_values=TIMING_P, tolerances=TIMING_TOL, n=500, d=4, seed=0,
                    fw_max_iter=20000, repeats=3) -> list[TimingCell]:
    """Wall-clock of both optimizers on the same problem and tolerance.

    Each cell reports the best of ``repeats`` runs.  A Frank-Wolfe run that
    hits ``fw_max_iter`` is marked unconverged and its ratio is a lower bound.
    """
    for p in p_values:
        if not any(abs(p - g) < 1e-12 for g in P_GRID):
            raise InvalidInput(f"p={p} is not in the grid")
    for tol in tolerances:
        if tol not in TIMING_TOL:
            raise InvalidInput(f"tolerance {tol} not in {TIMING_TOL}")
    S, y = synthetic_fusion_problem(n, d, seed)
    cells = []
    for p in p_values:
        for tol in tolerances:
            cfg = OptimizerConfig(p_base=p, tolerance=tol, locality_enabled=False)
            ti, ri = _time_call(lambda: optimize_interior_point(S, None, y, cfg), repeats)
            tf, rf = _time_call(lambda: optimize_frank_wolfe(S, y, p, cfg, max_iter=fw_max_iter),
                                repeats)
            cells.append(TimingCell(p=p, tolerance=tol, ip_seconds=ti, fw_seconds=tf,
                                    ip_objective=ri.hinge, fw_objective=rf.objective,
                                    ip_converged=ri.converged, fw_converged=rf.converged,
                                    ip_epochs=ri.epochs, fw_iterations=rf.epochs))
    return cells


def format_p(p) -> str:
    for num, den in ((32, 31), (16, 15), (8, 7), (4, 3)):
        if abs(p - num / den) < 1e-12:
            return f"{num}/{den}"
    return f"{p:g}"


def write_timing_csv(cells: list[TimingCell], path, detail_path=None) -> None:
    """Table-9 layout: one row per p, one column per tolerance, cell = FW/IP ratio.

    Unconverged Frank-Wolfe cells carry a ``>`` prefix (lower bound).
    """
    ps = sorted({c.p for c in cells})
    tols = sorted({c.tolerance for c in cells}, reverse=True)
    lookup = {(c.p, c.tolerance): c for c in cells}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", *(f"{t:g}" for t in tols)])
        for p in ps:
            row = [format_p(p)]
            for t in tols:
                c = lookup.get((p, t))
                if c is None:
                    row.append("")
                else:
                    row.append(("" if c.fw_converged else ">") + f"{c.ratio:.3f}")
            w.writerow(row)
    if detail_path is not None:
        with open(detail_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "tolerance", "ip_objective", "fw_objective", "ip_converged",
                        "fw_converged", "ip_epochs", "fw_iterations"])
            for c in cells:
                w.writerow([format_p(c.p), f"{c.tolerance:g}", f"{c.ip_objective:.10f}",
                            f"{c.fw_objective:.10f}", c.ip_converged, c.fw_converged,
                            c.ip_epochs, c.fw_iterations])
