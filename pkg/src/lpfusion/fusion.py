"""Per-sample lp-constrained hinge-loss fusion weights.

The interior-point optimizer minimises, for every weight row, the mean hinge
loss of its sample group plus the log barrier ``-mu * ln(1 - ||w||_p^p)``.
Each epoch is one barrier stage: a short run of backtracking gradient steps
at fixed ``mu`` followed by the decay ``mu <- beta * mu``.  Backtracking
rejects any trial point outside the open ball, so iterates stay strictly
interior and the radial projection only acts as a safeguard.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import InfeasiblePoint, InvalidInput, NumericalFailure
from .scorespace import NormalizerState, ScoreMatrix, Stage, range_scale, trimmed_minmax

P_GRID = (32 / 31, 16 / 15, 8 / 7, 4 / 3, 2.0, 4.0, 8.0, 10.0, 100.0)
P_MIN = 1.0 + 1e-6
P_MAX = 100.0
FEASIBILITY_TOL = 1e-9
CHECK_ENV = "LPFUSION_CHECK_FEASIBILITY"

_ARMIJO_C = 0.3
_MAX_HALVINGS = 20
_STEP_FLOOR = 1e-14
_STEP_CAP = 1.0


# --------------------------------------------------------------------------
# norms and elementary pieces


def lp_power_sum(w, p):
    """``sum_j |w_j|^p`` along the last axis; ``p`` may be per-row."""
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.ndim:
        p = p[..., None]
    with np.errstate(over="ignore"):
        return np.sum(np.abs(w) ** p, axis=-1)


def lp_norm(w, p):
    """``||w||_p`` along the last axis, scaled to avoid overflow at large p."""
    w = np.asarray(w, dtype=float)
    p = np.asarray(p, dtype=float)
    a = np.abs(w)
    m = np.max(a, axis=-1)
    safe = np.where(m > 0, m, 1.0)
    pe = p[..., None] if p.ndim else p
    return m * np.sum((a / safe[..., None]) ** pe, axis=-1) ** (1.0 / p)


def _signed_pow(w, e):
    return np.sign(w) * np.abs(w) ** e


def hinge_loss_and_grad(s, y, w):
    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    if y not in (-1, 1):
        raise InvalidInput(f"label must be +1 or -1, got {y}")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(w))):
        raise InvalidInput("non-finite input to hinge loss")
    loss = max(0.0, 1.0 - y * float(s @ w))
    if loss > 0.0:
        return loss, -y * s
    return loss, np.zeros_like(s)


def barrier_value(w, p, mu):
    n_p = float(lp_power_sum(w, p))
    if not n_p < 1.0:
        raise InfeasiblePoint(f"||w||_p^p = {n_p} is not inside the unit ball")
    return -mu * np.log1p(-n_p)


def barrier_grad(w, p, mu):
    """Gradient of ``-mu * ln(1 - ||w||_p^p)``."""
    w = np.asarray(w, dtype=float)
    n_p = float(lp_power_sum(w, p))
    if not n_p < 1.0:
        raise InfeasiblePoint(f"||w||_p^p = {n_p} is not inside the unit ball")
    return mu * p * _signed_pow(w, p - 1.0) / (1.0 - n_p)


def project_lp_ball(w, p):
    """Radial scaling onto the unit lp ball; interior points are returned unchanged."""
    w = np.asarray(w, dtype=float)
    norm = np.asarray(lp_norm(w, p), dtype=float)
    if w.ndim == 2:
        return w / np.maximum(norm, 1.0)[:, None]
    if norm <= 1.0:
        return w.copy()
    return w / norm


def euclidean_project_lp_ball(w, p, tol=1e-15):
    """Nearest point of the unit lp ball in Euclidean distance.

    Reference implementation used to cross-check the radial projection; not
    used by the optimizers.  Each coordinate solves ``v + lam*p/2*v^(p-1) =
    |w_j|`` (safeguarded Newton inside its bracket) and ``lam`` is the root of
    ``||v(lam)||_p^p = 1``.
    """
    w = np.asarray(w, dtype=float)
    if lp_norm(w, p) <= 1.0:
        return w.copy()
    a = np.abs(w)
    e = p - 1.0

    def coords(lam):
        c = lam * p / 2.0
        lo, hi = np.zeros_like(a), a.copy()
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = np.minimum(a, (a / c) ** (1.0 / e)) if c > 0 else a.copy()
            for _ in range(300):
                f = v + c * v ** e - a
                if np.all(np.abs(f) <= tol * (1.0 + a)):
                    break
                hi = np.where(f > 0, v, hi)
                lo = np.where(f > 0, lo, v)
                nv = v - f / (1.0 + c * e * v ** (e - 1.0))
                # bisect when Newton leaves the bracket or barely moves
                slow = np.abs(nv - v) < 0.05 * (hi - lo)
                bad = ~np.isfinite(nv) | (nv <= lo) | (nv >= hi) | slow
                v = np.where(bad, 0.5 * (lo + hi), nv)
        return v

    def excess(lam):
        return lp_power_sum(coords(lam), p) - 1.0

    lam_hi = 1.0
    while excess(lam_hi) > 0:
        lam_hi *= 2.0
    lam = brentq(excess, 0.0, lam_hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.sign(w) * coords(lam)


# --------------------------------------------------------------------------
# locality


def _check_locality_args(n, k):
    if k < 1 or k >= n:
        raise InvalidInput(f"locality_k must satisfy 1 <= k < n, got k={k}, n={n}")


def local_dispersion(X_query, X_train, k, exclude_self=False, tree=None):
    """Mean distance from each query point to its k nearest training points.

    With ``exclude_self`` the query points are the training points themselves
    and each point's own zero distance is dropped.
    """
    X_train = np.asarray(X_train, dtype=float)
    X_query = np.atleast_2d(np.asarray(X_query, dtype=float))
    tree = tree if tree is not None else cKDTree(X_train)
    kk = k + 1 if exclude_self else k
    dist, _ = tree.query(X_query, k=kk)
    dist = np.asarray(dist).reshape(X_query.shape[0], kk)
    if exclude_self:
        dist = dist[:, 1:]
    return dist.mean(axis=1)


def p_from_ratio(r, p_base):
    r = np.maximum(np.asarray(r, dtype=float), 1e-6)
    return np.clip(1.0 + (p_base - 1.0) / r, P_MIN, P_MAX)


def locality_p_all(X_train, p_base, k):
    """Per-training-sample norm parameters (self excluded from neighbours)."""
    X_train = np.asarray(X_train, dtype=float)
    _check_locality_args(X_train.shape[0], k)
    if p_base < P_MIN:
        raise InvalidInput(f"p_base must be >= {P_MIN}, got {p_base}")
    delta = local_dispersion(X_train, X_train, k, exclude_self=True)
    med = float(np.median(delta))
    if med <= 0:
        return np.full(X_train.shape[0], float(np.clip(p_base, P_MIN, P_MAX)))
    return p_from_ratio(delta / med, p_base)


def locality_p(x_i, X_train, p_base, k, exclude_self=False):
    """Norm parameter of one point given its dispersion relative to the training median.

    Set ``exclude_self`` when ``x_i`` is itself a row of ``X_train``.
    """
    X_train = np.asarray(X_train, dtype=float)
    _check_locality_args(X_train.shape[0], k)
    if p_base < P_MIN:
        raise InvalidInput(f"p_base must be >= {P_MIN}, got {p_base}")
    tree = cKDTree(X_train)
    ref = local_dispersion(X_train, X_train, k, exclude_self=True, tree=tree)
    med = float(np.median(ref))
    delta = float(local_dispersion(x_i, X_train, k, exclude_self=exclude_self, tree=tree)[0])
    if med <= 0:
        return float(np.clip(p_base, P_MIN, P_MAX))
    return float(p_from_ratio(delta / med, p_base))


# --------------------------------------------------------------------------
# configuration and results


@dataclass(frozen=True)
class OptimizerConfig:
    p_base: float = 2.0
    mu0: float = 10.0
    beta: float = 0.5
    learning_rate: float = 0.01
    max_epochs: int = 200
    tolerance: float = 1e-4
    locality_k: int = 10
    locality_enabled: bool = True
    # gradient steps per barrier stage and starting radius (fraction of the
    # uniform unit-norm point) for the interior-point optimizer
    inner_steps: int = 10
    init_scale: float = 0.5

    def __post_init__(self):
        if not self.p_base >= P_MIN:
            raise InvalidInput(f"p_base must be >= {P_MIN}")
        if not self.mu0 > 0:
            raise InvalidInput("mu0 must be positive")
        if not 0 < self.beta < 1:
            raise InvalidInput("beta must lie in (0, 1)")
        if not self.learning_rate > 0:
            raise InvalidInput("learning_rate must be positive")
        if self.max_epochs < 1 or self.inner_steps < 1:
            raise InvalidInput("max_epochs and inner_steps must be positive")
        if not self.tolerance > 0:
            raise InvalidInput("tolerance must be positive")
        if self.locality_k < 1:
            raise InvalidInput("locality_k must be positive")
        if not 0 < self.init_scale < 1:
            raise InvalidInput("init_scale must lie in (0, 1)")


@dataclass(frozen=True)
class LocalWeightSet:
    weights: np.ndarray          # n x d
    local_p: np.ndarray          # n
    anchor_features: np.ndarray  # n x f
    shared: bool = False         # every row is the same global vector

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[0] != self.local_p.shape[0]:
            raise InvalidInput("weights and local_p must align")
        if self.anchor_features.shape[0] != self.weights.shape[0]:
            raise InvalidInput("anchor_features must align with weights")

    def max_violation(self) -> float:
        return float(np.max(lp_norm(self.weights, self.local_p) - 1.0))


@dataclass
class OptimizeResult:
    weights: LocalWeightSet
    objective: float
    hinge: float
    epochs: int
    converged: bool
    history: list = field(default_factory=list)
    steps: int = 0
    seconds: float = 0.0


def feasibility_checks_enabled() -> bool:
    return os.environ.get(CHECK_ENV, "") not in ("", "0")


def _assert_feasible(W, P, where):
    viol = np.max(lp_norm(W, P) - 1.0)
    if viol > FEASIBILITY_TOL:
        raise InfeasiblePoint(f"{where}: weight row exceeds its lp ball by {viol:.3e}")


def _validate_problem(S, y, X=None):
    if isinstance(S, ScoreMatrix):
        if S.stage is Stage.RAW:
            raise InvalidInput("fusion expects standardized scores")
        S = S.values
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise InvalidInput("score matrix must be 2-D")
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != S.shape[0]:
        raise InvalidInput(f"{y.shape[0]} labels for {S.shape[0]} score rows")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInput("labels must be +1 or -1")
    if not np.all(np.isfinite(S)):
        raise InvalidInput("non-finite scores")
    if X is not None:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != S.shape[0]:
            raise InvalidInput(f"{X.shape[0]} feature rows for {S.shape[0]} score rows")
    return S, y, X


# --------------------------------------------------------------------------
# interior point


class _Problem:
    """Rows of W are independent subproblems sharing one barrier parameter.

    In local mode row i only sees sample i; in global mode a single row sees
    the mean hinge loss over all samples.
    """

    def __init__(self, S, y, P, local):
        self.S, self.y, self.P, self.local = S, y, P, local
        self.ys = S * y[:, None]

    def hinge(self, W, rows):
        if self.local:
            m = np.einsum("ij,ij->i", self.ys[rows], W)
            return np.maximum(0.0, 1.0 - m)
        return np.array([np.maximum(0.0, 1.0 - self.ys @ W[0]).mean()])

    def value(self, W, rows, mu):
        n_p = lp_power_sum(W, self.P[rows])
        with np.errstate(divide="ignore", invalid="ignore"):
            bar = np.where(n_p < 1.0, -np.log1p(-np.minimum(n_p, 1.0)), np.inf)
        return self.hinge(W, rows) + mu * bar, bar

    def grad(self, W, rows, mu):
        P = self.P[rows]
        if self.local:
            ys = self.ys[rows]
            act = np.einsum("ij,ij->i", ys, W) < 1.0
            g = -ys * act[:, None]
        else:
            act = self.ys @ W[0] < 1.0
            g = -(self.ys[act].sum(axis=0) / self.S.shape[0])[None, :]
        n_p = lp_power_sum(W, P)
        return g + mu * P[:, None] * _signed_pow(W, P[:, None] - 1.0) / (1.0 - n_p)[:, None]


def _run_stage(prob, W, mu, steps, t, inner_steps):
    """Backtracking gradient descent on every row at fixed mu.

    A row leaves the stage once a step fails to decrease its objective; this
    happens at the hinge kink, where the barrier and hinge gradients balance.
    """
    rows = np.arange(W.shape[0])
    F, _ = prob.value(W, rows, mu)
    live = np.ones(W.shape[0], dtype=bool)
    for _ in range(inner_steps):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        G = prob.grad(W[idx], idx, mu)
        gg = np.einsum("ij,ij->i", G, G)
        t0 = t[idx].copy()
        t[idx] = np.minimum(2.0 * t0, _STEP_CAP)
        pending = gg > 1e-24
        newF = F[idx].copy()
        for _ in range(_MAX_HALVINGS):
            pi = np.flatnonzero(pending)
            if pi.size == 0:
                break
            rows_p = idx[pi]
            trial = W[rows_p] - t[rows_p, None] * G[pi]
            Ft, _ = prob.value(trial, rows_p, mu)
            ok = Ft <= F[rows_p] - _ARMIJO_C * t[rows_p] * gg[pi]
            acc = pi[ok]
            W[idx[acc]] = trial[ok]
            newF[acc] = Ft[ok]
            pending[acc] = False
            t[rows_p[~ok]] *= 0.5
        steps += idx.size
        failed = pending | (gg <= 1e-24)
        # failed rows keep a moderate step for the next stage
        t[idx[failed]] = np.maximum(t0[failed] * 0.25, _STEP_FLOOR)
        dec = F[idx] - newF
        F[idx] = newF
        live[idx[failed | (dec <= 1e-15)]] = False
    return W, steps


def optimize_interior_point(S, X, y, config: OptimizerConfig,
                            callback: Callable | None = None) -> OptimizeResult:
    """Locally adaptive barrier optimisation of per-sample fusion weights.

    ``callback(epoch, weights, local_p, objective)`` runs after every epoch.
    When the ``LPFUSION_CHECK_FEASIBILITY`` environment variable is set, every
    epoch also asserts that each row lies inside its lp ball.
    """
    t0 = time.perf_counter()
    S, y, X = _validate_problem(S, y, X)
    n, d = S.shape
    if X is None:
        X = np.zeros((n, 1))
    local = config.locality_enabled
    if local:
        P = locality_p_all(X, config.p_base, config.locality_k)
    else:
        P = np.full(n, config.p_base)
    n_rows = n if local else 1
    P_rows = P if local else P[:1]
    prob = _Problem(S, y, P_rows, local)

    W = np.ones((n_rows, d)) * (config.init_scale / lp_norm(np.ones(d), P_rows))[:, None]
    t = np.full(n_rows, config.learning_rate)
    mu = config.mu0
    rows = np.arange(n_rows)
    check = feasibility_checks_enabled()
    F_prev = float(np.mean(prob.value(W, rows, mu)[0]))
    history = [F_prev]
    steps = 0
    converged = False
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        W, steps = _run_stage(prob, W, mu, steps, t, config.inner_steps)
        # safeguard; rows are already interior so this is normally a no-op
        norms = lp_norm(W, P_rows)
        out = norms > 1.0
        if np.any(out):
            W[out] /= norms[out, None]
        Fi, _ = prob.value(W, rows, mu)
        F = float(np.mean(Fi))
        if not np.isfinite(F) and np.all(norms < 1.0):
            raise NumericalFailure(f"objective became {F} at epoch {epoch} (mu={mu:.3e})")
        if not np.all(np.isfinite(W)):
            raise NumericalFailure(f"non-finite weights at epoch {epoch} (mu={mu:.3e})")
        history.append(F)
        if check:
            _assert_feasible(W, P_rows, f"interior point epoch {epoch}")
        if callback is not None:
            callback(epoch, W, P_rows, F)
        # the barrier stage optimum is within mu of the constrained optimum
        # (one constraint per row), so small steps only count once mu is small
        if abs(F_prev - F) < config.tolerance and mu <= config.tolerance:
            converged = True
            break
        mu *= config.beta
        F_prev = F

    hinge = float(np.mean(prob.hinge(W, rows)))
    weights = W if local else np.repeat(W, n, axis=0)
    ws = LocalWeightSet(weights=weights, local_p=P.copy(), anchor_features=X.copy(),
                        shared=not local)
    return OptimizeResult(weights=ws, objective=history[-1], hinge=hinge, epochs=epoch,
                          converged=converged, history=history, steps=steps,
                          seconds=time.perf_counter() - t0)


def deployment_weights(weight_set: LocalWeightSet, S, y, tol: float = 1e-9) -> LocalWeightSet:
    """Prepare trained local rows for nearest-anchor scoring.

    Rows that reached no margin (a zero score vector has a constant hinge, so
    the barrier shrinks its weights to 0) take the direction of the nearest
    informative row.  Every row is then scaled onto the boundary of its own
    lp ball: a row that clears the margin easily ends near the minimum-norm
    point, whose length only encodes the inverse score level of its anchor.
    """
    if weight_set.shared:
        return weight_set
    W = weight_set.weights.copy()
    ys = np.asarray(S, dtype=float) * np.asarray(y, dtype=float)[:, None]
    bad = np.einsum("ij,ij->i", ys, W) <= tol
    bad |= ~np.any(W != 0, axis=1)
    if bad.all():
        return weight_set
    if bad.any():
        good = np.flatnonzero(~bad)
        _, j = cKDTree(weight_set.anchor_features[good]).query(
            weight_set.anchor_features[bad], k=1)
        W[bad] = W[good[j]]
    W /= lp_norm(W, weight_set.local_p)[:, None]
    return replace(weight_set, weights=project_lp_ball(W, weight_set.local_p))


# --------------------------------------------------------------------------
# Frank-Wolfe baseline


def lp_lmo(g, p):
    """Minimiser of <g, v> over the unit lp ball, via the dual exponent."""
    g = np.asarray(g, dtype=float)
    gmax = np.max(np.abs(g))
    if gmax == 0:
        return np.zeros_like(g)
    q = p / (p - 1.0)
    a = np.abs(g) / gmax
    gq = np.sum(a ** q) ** (1.0 / q)
    return -np.sign(g) * (a / gq) ** (q - 1.0)


def optimize_frank_wolfe(S, y, p, config: OptimizerConfig | None = None,
                         max_iter: int | None = None,
                         callback: Callable | None = None) -> OptimizeResult:
    """Global weight vector by Frank-Wolfe on the mean hinge loss.

    Starts from ``w = 0`` and stops when the duality gap drops to
    ``config.tolerance`` or after ``max_iter`` (default ``config.max_epochs``)
    iterations.
    """
    t0 = time.perf_counter()
    if not p > 1.0:
        raise InvalidInput(f"Frank-Wolfe needs p > 1, got {p}")
    config = config or OptimizerConfig(p_base=p, locality_enabled=False)
    S, y, _ = _validate_problem(S, y)
    n, d = S.shape
    ys = S * y[:, None]
    cap = config.max_epochs if max_iter is None else max_iter
    check = feasibility_checks_enabled()
    w = np.zeros(d)
    history = []
    converged = False
    it = 0
    for it in range(cap):
        m = ys @ w
        history.append(float(np.maximum(0.0, 1.0 - m).mean()))
        g = -ys[m < 1.0].sum(axis=0) / n
        v = lp_lmo(g, p)
        gap = float(g @ (w - v))
        if gap <= config.tolerance:
            converged = True
            break
        w = w + (2.0 / (it + 2.0)) * (v - w)
        if check:
            _assert_feasible(w[None, :], np.array([p]), f"Frank-Wolfe iteration {it}")
        if callback is not None:
            callback(it, w[None, :], np.array([p]), history[-1])
    else:
        it = cap
    obj = float(np.maximum(0.0, 1.0 - ys @ w).mean())
    ws = LocalWeightSet(weights=np.repeat(w[None, :], n, axis=0), local_p=np.full(n, float(p)),
                        anchor_features=np.zeros((n, 1)), shared=True)
    return OptimizeResult(weights=ws, objective=obj, hinge=obj, epochs=it, converged=converged,
                          history=history, steps=it, seconds=time.perf_counter() - t0)


# --------------------------------------------------------------------------
# deployment


class FusionMode(str, Enum):
    PURE_RPAU = "pure_rpau"
    PURE_PSEUDONEG = "pure_pseudoneg"
    NONPURE = "nonpure"


class FusionInput(str, Enum):
    ZSCORED = "zscored"
    NORMALIZED = "normalized"


@dataclass
class FusionModel:
    learners: tuple
    learner_ids: tuple
    normalizer: NormalizerState
    weight_set: LocalWeightSet
    threshold: float
    mode: FusionMode
    fusion_input: FusionInput = FusionInput.NORMALIZED
    config: OptimizerConfig | None = None
    feature_min: np.ndarray | None = None
    feature_max: np.ndarray | None = None
    _tree: cKDTree | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.mode = FusionMode(self.mode)
        self.fusion_input = FusionInput(self.fusion_input)
        if len(self.learners) < 2:
            raise InvalidInput("a fusion model needs at least 2 learners")
        if not np.isfinite(self.threshold):
            raise InvalidInput("threshold must be finite")

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.weight_set.anchor_features)
        return self._tree


def prepare_fusion_input(normalizer: NormalizerState, S: ScoreMatrix, fusion_input,
                         clip: bool = True) -> np.ndarray:
    """Matrix the weights act on.

    Training uses the clipped trimmed range.  Scoring passes ``clip=False`` so
    held-out rows outside the training range keep their ordering instead of
    tying at 0 or 1.
    """
    if S.stage is not Stage.ZSCORED:
        raise InvalidInput(f"expected zscored scores, got {S.stage.value}")
    if FusionInput(fusion_input) is FusionInput.NORMALIZED:
        if clip:
            return trimmed_minmax(normalizer, S).values
        if not normalizer.has_range:
            raise InvalidInput("normalizer has no fitted trimmed range")
        return range_scale(S.values, normalizer.lower, normalizer.upper, clip=False)
    return S.values


def lookup_weights(weight_set: LocalWeightSet, X, tree=None) -> np.ndarray:
    """Weight row of the nearest training anchor for each query point."""
    m = np.asarray(X).shape[0]
    if weight_set.shared:
        return np.broadcast_to(weight_set.weights[0], (m, weight_set.weights.shape[1]))
    tree = tree if tree is not None else cKDTree(weight_set.anchor_features)
    _, idx = tree.query(np.asarray(X, dtype=float), k=1)
    return weight_set.weights[idx]


def fuse_scores(model: FusionModel, S_test: ScoreMatrix, X_test=None) -> np.ndarray:
    ws = model.weight_set
    if ws is None or ws.weights.shape[0] == 0:
        raise InvalidInput("fusion model has no trained weights")
    if S_test.d != ws.weights.shape[1]:
        raise InvalidInput(f"expected {ws.weights.shape[1]} learners, got {S_test.d}")
    values = prepare_fusion_input(model.normalizer, S_test, model.fusion_input, clip=False)
    if ws.shared:
        return values @ ws.weights[0]
    if X_test is None:
        raise InvalidInput("locality-enabled models need test features")
    X_test = np.asarray(X_test, dtype=float)
    if X_test.ndim == 1:
        X_test = X_test[:, None]
    W = lookup_weights(ws, X_test, model.tree)
    return np.einsum("ij,ij->i", values, W)


def baseline_fuse(S, rule: str = "sum", j: int | None = None) -> np.ndarray:
    values = S.values if isinstance(S, ScoreMatrix) else np.asarray(S, dtype=float)
    if rule == "sum":
        return values.sum(axis=1)
    if rule == "single_best":
        if j is None or not 0 <= j < values.shape[1]:
            raise InvalidInput(f"invalid learner index {j} for {values.shape[1]} learners")
        return values[:, j].copy()
    raise InvalidInput(f"unknown baseline rule {rule!r}")


def fused_range_scale(values, lower, upper):
    """Unclipped two-sided min-max for fused scores."""
    return range_scale(values, lower, upper, clip=False)
