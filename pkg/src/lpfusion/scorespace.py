"""Score matrices and the raw -> zscored -> normalized pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import InsufficientData, InvalidInput

STD_FLOOR = 1e-12
GAP_FLOOR = 1e-12


class Stage(str, Enum):
    RAW = "raw"
    ZSCORED = "zscored"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class ScoreMatrix:
    values: np.ndarray
    learner_ids: tuple[str, ...]
    stage: Stage = Stage.RAW

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvalidInput(f"score matrix must be n x d with n, d >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInput("score matrix contains non-finite entries")
        ids = tuple(str(i) for i in self.learner_ids)
        if len(ids) != values.shape[1]:
            raise InvalidInput(f"{len(ids)} learner ids for {values.shape[1]} columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "learner_ids", ids)
        object.__setattr__(self, "stage", Stage(self.stage))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> ScoreMatrix:
        return replace(self, values=self.values[rows])


@dataclass(frozen=True)
class NormalizerState:
    """Column statistics fitted on training scores.

    ``lower``/``upper`` stay ``None`` until :func:`fit_trimmed_range` is called.
    """

    mean: np.ndarray
    std: np.ndarray
    rho: int | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.std < STD_FLOOR):
            raise InvalidInput("std must respect the floor")
        if (self.lower is None) != (self.upper is None):
            raise InvalidInput("lower and upper quantiles are set together")
        if self.lower is not None and np.any(self.lower > self.upper):
            raise InvalidInput("lower quantile exceeds upper quantile")

    @property
    def has_range(self) -> bool:
        return self.lower is not None


def _require_stage(S: ScoreMatrix, stage: Stage, op: str):
    if S.stage is not stage:
        raise InvalidInput(f"{op} expects a {stage.value} matrix, got {S.stage.value}")


def fit_zscore(S_train: ScoreMatrix) -> NormalizerState:
    _require_stage(S_train, Stage.RAW, "fit_zscore")
    if S_train.n < 2:
        raise InsufficientData("z-score statistics need at least 2 rows")
    mean = S_train.values.mean(axis=0)
    std = np.maximum(S_train.values.std(axis=0), STD_FLOOR)
    return NormalizerState(mean=mean, std=std)


def apply_zscore(state: NormalizerState, S: ScoreMatrix) -> ScoreMatrix:
    _require_stage(S, Stage.RAW, "apply_zscore")
    if S.d != state.mean.shape[0]:
        raise InvalidInput(f"expected {state.mean.shape[0]} columns, got {S.d}")
    return replace(S, values=(S.values - state.mean) / state.std, stage=Stage.ZSCORED)


def inverse_zscore(state: NormalizerState, S: ScoreMatrix) -> ScoreMatrix:
    _require_stage(S, Stage.ZSCORED, "inverse_zscore")
    return replace(S, values=S.values * state.std + state.mean, stage=Stage.RAW)


def fit_trimmed_range(state: NormalizerState, S_train: ScoreMatrix, rho: int) -> NormalizerState:
    """Attach the rho and 100-rho percentiles of zscored training scores."""
    _require_stage(S_train, Stage.ZSCORED, "fit_trimmed_range")
    if not 1 <= int(rho) <= 10 or int(rho) != rho:
        raise InvalidInput(f"rho must be an integer in 1..10, got {rho}")
    lower = np.percentile(S_train.values, rho, axis=0)
    upper = np.percentile(S_train.values, 100 - rho, axis=0)
    return replace(state, rho=int(rho), lower=lower, upper=upper)


def range_scale(values, lower, upper, clip: bool = True):
    """Two-sided min-max with the given bounds; degenerate gaps map to 0.5."""
    values = np.asarray(values, dtype=float)
    lower = np.asarray(lower, dtype=float)
    gap = np.asarray(upper, dtype=float) - lower
    safe = np.where(gap < GAP_FLOOR, 1.0, gap)
    out = (values - lower) / safe
    if clip:
        out = np.clip(out, 0.0, 1.0)
    return np.where(gap < GAP_FLOOR, 0.5, out)


def trimmed_minmax(state: NormalizerState, S: ScoreMatrix) -> ScoreMatrix:
    _require_stage(S, Stage.ZSCORED, "trimmed_minmax")
    if not state.has_range:
        raise InvalidInput("normalizer has no fitted trimmed range")
    if S.d != state.lower.shape[0]:
        raise InvalidInput(f"expected {state.lower.shape[0]} columns, got {S.d}")
    return replace(S, values=range_scale(S.values, state.lower, state.upper), stage=Stage.NORMALIZED)


def pseudo_negative_rows(n: int, fraction: float, seed: int) -> np.ndarray:
    """Sorted indices of the rows mirrored by :func:`generate_pseudo_negatives`."""
    k = math.ceil(fraction * n)
    return np.sort(np.random.default_rng(seed).choice(n, size=k, replace=False))


def generate_pseudo_negatives(S_val: ScoreMatrix, fraction: float = 0.5, seed: int = 0):
    """Append sign-flipped copies of a random subset of zscored normal rows.

    Returns the stacked matrix and labels (+1 for originals, -1 for copies).
    """
    _require_stage(S_val, Stage.ZSCORED, "generate_pseudo_negatives")
    if not 0 < fraction <= 1:
        raise InvalidInput(f"fraction must be in (0, 1], got {fraction}")
    if S_val.n < 2:
        raise InsufficientData("need at least 2 validation rows")
    picked = pseudo_negative_rows(S_val.n, fraction, seed)
    values = np.vstack([S_val.values, -S_val.values[picked]])
    labels = np.concatenate([np.ones(S_val.n), -np.ones(picked.size)])
    return replace(S_val, values=values), labels
