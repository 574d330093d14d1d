"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np
from scipy.stats import rankdata


def brute_force_hinge(S, y, p, resolution=0.005):
    """Minimum mean hinge over a grid of the unit lp disk (d = 2)."""
    g = np.arange(-1.0, 1.0 + resolution / 2, resolution)
    W = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    W = W[np.sum(np.abs(W) ** p, axis=1) <= 1.0]
    ys = S * y[:, None]
    best = np.inf
    for chunk in np.array_split(W, max(1, len(W) // 4000)):
        h = np.maximum(0.0, 1.0 - chunk @ ys.T).mean(axis=1)
        best = min(best, float(h.min()))
    return best


def exact_local_hinge(S, y, P):
    """Per-row optimum max(0, 1 - ||y_i s_i||_q), averaged (dual norm attains the margin)."""
    q = P / (P - 1.0)
    a = np.abs(S * y[:, None])
    m = a.max(axis=1)
    safe = np.where(m > 0, m, 1.0)
    dual = m * np.sum((a / safe[:, None]) ** q[:, None], axis=1) ** (1.0 / q)
    return float(np.mean(np.maximum(0.0, 1.0 - dual)))


def friedman_statistic(values, higher_is_better=True):
    """Tie-corrected Friedman chi-square written out from the textbook formula."""
    b, k = values.shape
    R = np.array([rankdata(-row if higher_is_better else row) for row in values])
    Rj = R.sum(axis=0)
    stat = 12.0 / (b * k * (k + 1)) * np.sum(Rj ** 2) - 3.0 * b * (k + 1)
    ties = 0.0
    for row in values:
        _, c = np.unique(row, return_counts=True)
        ties += float(np.sum(c ** 3 - c))
    return stat / (1.0 - ties / (b * k * (k * k - 1)))


def small_instance(seed, n=20):
    """Two-learner labelled problem whose hinge optimum is strictly positive."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    S = np.column_stack([y * 1.0 + rng.normal(scale=1.0, size=n),
                         y * 0.5 + rng.normal(scale=1.0, size=n)])
    return S, y


def symmetric_instance(seed, n=200, d=4):
    """Exchangeable learners: every column has the same distribution."""
    rng = np.random.default_rng(seed)
    base = rng.normal(size=(n, 1)) * 0.2 + 0.5
    S = np.clip(base + rng.normal(scale=0.15, size=(n, d)), 0.0, 1.0)
    return S, np.ones(n)


def dominant_instance(seed, n=200, d=4):
    """One learner separates the classes (AUC ~1); the others are noise (AUC ~0.5)."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    S = rng.normal(size=(n, d))
    S[:, 0] = 2.5 * y + rng.normal(scale=0.3, size=n)
    return S, y
