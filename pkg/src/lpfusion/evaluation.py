"""Metrics, threshold selection and the Skillings-Mack rank test.

Score orientation throughout: higher means more normal.  Labels are +1 for
normal and -1 for anomalous.  AUC-ROC treats normal as the positive class;
AUC-PR treats anomalies as the positive class.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.stats import chi2, rankdata

from .errors import DataIOError, InsufficientData, InvalidInput, ParseError, UndefinedMetric
from .scorespace import range_scale


def _prep(scores, labels):
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise InvalidInput(f"{scores.size} scores for {labels.size} labels")
    if not np.all(np.isin(labels, (-1, 1))):
        raise InvalidInput("labels must be +1 (normal) or -1 (anomaly)")
    return scores, labels


def auc_roc(scores, labels) -> float:
    """P(normal score > anomaly score) + 0.5 P(tie)."""
    scores, labels = _prep(scores, labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC-ROC needs both classes")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Average precision with anomalies as the positive class.

    Thresholds sweep the distinct values of the anomaly score (``-scores``);
    tied samples enter together.
    """
    scores, labels = _prep(scores, labels)
    pos = labels == -1
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise UndefinedMetric("AUC-PR needs at least one anomaly")
    anomaly = -scores
    order = np.argsort(-anomaly, kind="mergesort")
    a_sorted, p_sorted = anomaly[order], pos[order]
    tp = np.cumsum(p_sorted)
    seen = np.arange(1, len(a_sorted) + 1)
    # last index of each tie block
    last = np.r_[np.flatnonzero(np.diff(a_sorted) != 0), len(a_sorted) - 1]
    tp_b, seen_b = tp[last], seen[last]
    recall = tp_b / n_pos
    precision = tp_b / seen_b
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.sum(d_recall * precision))


def confusion_rates(scores, labels, threshold):
    scores, labels = _prep(scores, labels)
    pos = labels == 1
    if pos.all() or not pos.any():
        raise UndefinedMetric("rates need both classes")
    pred_normal = scores >= threshold
    tpr = float(np.mean(pred_normal[pos]))
    tnr = float(np.mean(~pred_normal[~pos]))
    return tpr, tnr


def g_mean(scores, labels, threshold) -> float:
    tpr, tnr = confusion_rates(scores, labels, threshold)
    return math.sqrt(tpr * tnr)


# --------------------------------------------------------------------------
# thresholds


class ThresholdStrategy(str, Enum):
    RPAU = "rpau"
    PSEUDO_NEG_GMEAN = "pseudo_neg_gmean"


def rpau_score(val_scores, rho) -> tuple[float, float]:
    """Mean relative margin of normal validation scores above their rho-th percentile.

    Scores are shifted positive by mapping their own range onto ``[1, 2]``, so
    the value is invariant to affine rescaling of the fused scores and lies in
    ``[0, 1]``.  Returns ``(rpau, threshold_in_raw_units)``.
    """
    val = np.asarray(val_scores, dtype=float).ravel()
    if val.size == 0:
        raise InsufficientData("RPAU needs validation scores")
    if not np.all(np.isfinite(val)):
        raise UndefinedMetric("RPAU needs finite scores")
    u = range_scale(val, val.min(), val.max(), clip=False) + 1.0
    theta = float(np.percentile(u, rho))
    rpau = float(np.mean(np.maximum(0.0, u / theta - 1.0)))
    return rpau, float(np.percentile(val, rho))


def best_gmean_threshold(scores, labels) -> tuple[float, float]:
    """Midpoint threshold with maximal G-mean; ties go to the widest gap, then the lowest."""
    scores, labels = _prep(scores, labels)
    if scores.size == 0:
        raise InsufficientData("no scores")
    vals = np.unique(scores)
    if vals.size == 1:
        return float(vals[0]), g_mean(scores, labels, vals[0])
    pos = labels == 1
    n_pos, n_neg = pos.sum(), (~pos).sum()
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("G-mean needs both classes")
    mids = 0.5 * (vals[:-1] + vals[1:])
    gaps = np.diff(vals)
    # counts strictly below each midpoint
    pos_below = np.searchsorted(np.sort(scores[pos]), mids)
    neg_below = np.searchsorted(np.sort(scores[~pos]), mids)
    tpr = 1.0 - pos_below / n_pos
    tnr = neg_below / n_neg
    gm = np.sqrt(tpr * tnr)
    best = gm.max()
    cand = np.flatnonzero(gm >= best - 1e-15)
    pick = cand[np.argmax(gaps[cand])]
    return float(mids[pick]), float(gm[pick])


def select_threshold(fused_val_scores, val_labels=None, strategy="rpau", rho: int = 5) -> float:
    strategy = ThresholdStrategy(strategy)
    scores = np.asarray(fused_val_scores, dtype=float).ravel()
    if scores.size == 0:
        raise InsufficientData("no validation scores")
    if strategy is ThresholdStrategy.RPAU:
        if val_labels is not None and np.any(np.asarray(val_labels) != 1):
            raise InvalidInput("rpau uses normal validation scores only")
        return float(np.percentile(scores, rho))
    if val_labels is None:
        raise InvalidInput("pseudo_neg_gmean needs labels")
    return best_gmean_threshold(scores, val_labels)[0]


# --------------------------------------------------------------------------
# reports


def mean_std(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std())


@dataclass
class EvalReport:
    auc_roc: float
    auc_pr: float
    g_mean: float
    threshold: float
    per_trial: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)

    @classmethod
    def from_trials(cls, trials: list[dict]) -> EvalReport:
        if not trials:
            raise InsufficientData("no trials to aggregate")
        keys = ("auc_roc", "auc_pr", "g_mean", "threshold")
        per = {k: [float(t[k]) for t in trials] for k in keys}
        means = {k: mean_std(v)[0] for k, v in per.items()}
        std = {k: mean_std(v)[1] for k, v in per.items()}
        return cls(per_trial=per, std=std, **means)


# --------------------------------------------------------------------------
# rank test


@dataclass
class RankTable:
    """Methods as columns, datasets as rows; NaN marks a missing cell."""

    values: np.ndarray
    methods: list[str]
    datasets: list[str]
    higher_is_better: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.datasets), len(self.methods)):
            raise InvalidInput("table shape must be datasets x methods")
        if len(self.methods) < 2 or len(self.datasets) < 2:
            raise InvalidInput("need at least 2 methods and 2 datasets")

    def ranks(self) -> np.ndarray:
        """Within-dataset ranks (1 = best), average ranks for ties, NaN where missing."""
        out = np.full_like(self.values, np.nan)
        for j, row in enumerate(self.values):
            obs = ~np.isnan(row)
            if obs.sum() == 0:
                continue
            v = -row[obs] if self.higher_is_better else row[obs]
            out[j, obs] = rankdata(v)
        return out

    def mean_ranks(self) -> np.ndarray:
        return np.nanmean(self.ranks(), axis=0)


@dataclass
class RankTestResult:
    statistic: float
    p_value: float
    mean_ranks: np.ndarray
    df: int
    blocks_used: int


def skillings_mack(table: RankTable) -> RankTestResult:
    """Skillings-Mack statistic with a tie-aware covariance.

    Each block contributes weighted centred ranks ``sqrt(12/(k_j+1)) *
    (r - (k_j+1)/2)``.  The covariance uses the block's actual rank variance,
    so untied blocks give the usual Skillings-Mack matrix and complete tables
    give the tie-corrected Friedman statistic.
    """
    k = len(table.methods)
    ranks = table.ranks()
    A = np.zeros(k)
    cov = np.zeros((k, k))
    used = 0
    for j, row in enumerate(ranks):
        obs = ~np.isnan(row)
        kj = int(obs.sum())
        if kj < 2:
            warnings.warn(f"dataset {table.datasets[j]!r} has {kj} observed methods; skipped",
                          RuntimeWarning, stacklevel=2)
            continue
        used += 1
        w2 = 12.0 / (kj + 1)
        r = row[obs]
        A[obs] += math.sqrt(w2) * (r - (kj + 1) / 2.0)
        v = float(np.mean((r - r.mean()) ** 2))
        idx = np.flatnonzero(obs)
        block = np.full((kj, kj), -w2 * v / (kj - 1))
        np.fill_diagonal(block, w2 * v)
        cov[np.ix_(idx, idx)] += block
    if used == 0:
        raise InsufficientData("no dataset has at least 2 observed methods")
    if np.allclose(cov, 0.0):
        stat = 0.0
    else:
        stat = float(A @ np.linalg.pinv(cov, rcond=1e-12, hermitian=True) @ A)
        stat = max(stat, 0.0)
    df = k - 1
    return RankTestResult(statistic=stat, p_value=float(chi2.sf(stat, df)),
                          mean_ranks=table.mean_ranks(), df=df, blocks_used=used)


def read_rank_table(path, higher_is_better=True) -> RankTable:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise ParseError(f"{path}: expected a header and data rows")
    methods = rows[0][1:]
    datasets, values = [], []
    for r_i, row in enumerate(rows[1:], start=2):
        if len(row) != len(methods) + 1:
            raise ParseError(f"{path}:{r_i}: expected {len(methods) + 1} cells, got {len(row)}")
        datasets.append(row[0])
        vals = []
        for c_i, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell == "":
                vals.append(np.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"{path}:{r_i}: column {methods[c_i]!r} has non-numeric "
                                 f"value {cell!r}") from None
        values.append(vals)
    return RankTable(np.array(values), methods, datasets, higher_is_better)


def write_rank_table(table: RankTable, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", *table.methods])
        for name, row in zip(table.datasets, table.values):
            w.writerow([name, *("" if np.isnan(v) else repr(float(v)) for v in row)])
