import time

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lpfusion.errors import InfeasiblePoint, InsufficientData, InvalidInput
from lpfusion.fusion import (
    CHECK_ENV, P_GRID, P_MAX, P_MIN, FusionInput, FusionModel, LocalWeightSet, OptimizerConfig,
    barrier_grad, barrier_value, baseline_fuse, deployment_weights, euclidean_project_lp_ball,
    fuse_scores, hinge_loss_and_grad, locality_p, locality_p_all, lp_lmo, lp_norm,
    optimize_frank_wolfe, optimize_interior_point, p_from_ratio, project_lp_ball,
)

from lpfusion.scorespace import NormalizerState, ScoreMatrix, Stage

from oracles import brute_force_hinge, exact_local_hinge, small_instance

vectors = arrays(np.float64, st.integers(1, 4),
                 elements=st.floats(-50, 50, allow_nan=False, allow_subnormal=False))


def global_cfg(p, tol=1e-4, **kw):
    return OptimizerConfig(p_base=p, locality_enabled=False, tolerance=tol, **kw)


# -- norms and projections

@pytest.mark.parametrize("p", P_GRID)
def test_lp_norm_matches_numpy(p, rng):
    w = rng.normal(size=(30, 4))
    assert np.allclose(lp_norm(w, p), np.linalg.norm(w, ord=p, axis=1), rtol=1e-12)


def test_lp_norm_large_p_no_overflow():
    w = np.array([1e6, 2e6])
    assert np.isfinite(lp_norm(w, 100.0))
    assert np.isclose(lp_norm(w, 100.0), 2e6, rtol=1e-2)


def test_project_examples():
    assert np.allclose(project_lp_ball(np.array([3.0, 4.0]), 2.0), [0.6, 0.8])
    inside = np.array([0.2, -0.3])
    assert np.array_equal(project_lp_ball(inside, 2.0), inside)
    out = project_lp_ball(np.array([2.0, 2.0]), 100.0)
    assert lp_norm(out, 100.0) <= 1 + 1e-12
    assert np.isclose(out[0], out[1])


@given(vectors, st.sampled_from(P_GRID))
def test_projection_feasible_and_idempotent(w, p):
    v = project_lp_ball(w, p)
    assert lp_norm(v, p) <= 1 + 1e-9
    assert np.allclose(project_lp_ball(v, p), v, atol=1e-12)
    # radial: same direction
    if np.any(w):
        assert np.all(np.sign(v) == np.sign(w))


def test_euclidean_projection_equals_radial_for_p2(rng):
    for _ in range(50):
        w = rng.normal(size=rng.integers(1, 5)) * 3
        if np.linalg.norm(w) <= 1:
            continue
        assert np.allclose(euclidean_project_lp_ball(w, 2.0), project_lp_ball(w, 2.0), atol=1e-9)


@pytest.mark.parametrize("p", [1.5, 4.0])
def test_euclidean_projection_is_nearest(p, rng):
    # no feasible boundary point found by sampling is closer than the projection
    w = np.array([1.2, -0.7, 0.4])
    proj = euclidean_project_lp_ball(w, p)
    assert abs(lp_norm(proj, p) - 1) < 1e-9
    d0 = np.linalg.norm(w - proj)
    cand = rng.normal(size=(20000, 3))
    cand /= lp_norm(cand, p)[:, None]
    assert np.min(np.linalg.norm(cand - w, axis=1)) >= d0 - 1e-9


# -- barrier and hinge

def test_barrier_gradient_example():
    assert np.allclose(barrier_grad(np.array([0.5, 0.0]), 2.0, 1.0), [4 / 3, 0.0])


def test_barrier_outside_raises():
    with pytest.raises(InfeasiblePoint):
        barrier_value(np.array([1.0, 0.0]), 2.0, 1.0)
    with pytest.raises(InfeasiblePoint):
        barrier_grad(np.array([0.8, 0.8]), 2.0, 1.0)


@pytest.mark.parametrize("p", P_GRID)
def test_barrier_gradient_finite_differences(p, rng):
    for _ in range(20):
        w = rng.normal(size=3)
        w *= rng.uniform(0.1, 0.9) / lp_norm(w, p)
        g = barrier_grad(w, p, 0.7)
        h = 1e-6 * max(1e-3, np.min(np.abs(w)))
        fd = np.array([(barrier_value(w + h * e, p, 0.7) - barrier_value(w - h * e, p, 0.7))
                       / (2 * h) for e in np.eye(3)])
        assert np.linalg.norm(g - fd) <= 1e-4 * max(1.0, np.linalg.norm(g))


def test_hinge_examples():
    loss, g = hinge_loss_and_grad(np.array([0.5, 0.5]), 1.0, np.array([1.0, 0.0]))
    assert loss == 0.5 and np.allclose(g, [-0.5, -0.5])
    loss, g = hinge_loss_and_grad(np.array([1.0, 0.0]), 1.0, np.array([1.0, 0.0]))
    assert loss == 0.0 and not np.any(g)
    loss, g = hinge_loss_and_grad(np.array([1.0, 2.0]), -1.0, np.array([1.0, 1.0]))
    assert loss == 4.0 and np.allclose(g, [1.0, 2.0])


# -- locality

def test_p_from_ratio_examples():
    assert p_from_ratio(1.0, 2.0) == 2.0
    assert np.isclose(p_from_ratio(0.5, 2.0), 3.0)
    assert p_from_ratio(1e12, 2.0) == P_MIN
    assert p_from_ratio(1e-12, 2.0) == P_MAX


def test_locality_uniform_grid_gives_base_p():
    X = np.arange(30, dtype=float)[:, None]
    P = locality_p_all(X, 2.0, 2)
    assert np.allclose(P[2:-2], 2.0)


def test_locality_sparse_point_gets_smaller_p():
    X = np.vstack([np.random.default_rng(0).normal(scale=0.1, size=(40, 2)), [[5.0, 5.0]]])
    P = locality_p_all(X, 2.0, 5)
    assert P[-1] < np.median(P)
    assert np.all((P >= P_MIN) & (P <= P_MAX))


def test_locality_errors():
    X = np.zeros((5, 2))
    with pytest.raises((InvalidInput, InsufficientData)):
        locality_p_all(X, 2.0, 5)
    with pytest.raises((InvalidInput, InsufficientData)):
        locality_p(np.zeros(2), X, 2.0, 6)


# -- interior point

def test_ip_single_learner():
    rng = np.random.default_rng(3)
    S = rng.uniform(0.5, 1.0, size=(40, 1)) * 0.5
    res = optimize_interior_point(S, None, np.ones(40), global_cfg(2.0))
    assert res.weights.weights[0, 0] > 0.98


def test_ip_identical_columns_equal_weights():
    rng = np.random.default_rng(4)
    s = rng.uniform(0.1, 0.6, size=60)
    S = np.column_stack([s, s, s])
    res = optimize_interior_point(S, None, np.ones(60), global_cfg(3.0))
    w = res.weights.weights[0]
    assert np.allclose(w, w[0], rtol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_ip_small_instance_optimal(seed):
    S, y = small_instance(seed)
    best = brute_force_hinge(S, y, 2.0)
    res = optimize_interior_point(S, None, y, global_cfg(2.0))
    assert res.hinge <= best * 1.02 + 1e-12
    assert res.converged


@pytest.mark.parametrize("seed", range(4))
def test_fw_gap_certifies_suboptimality(seed):
    # for a convex objective f(w) - f* <= <g, w - v> at any iterate
    S, y = small_instance(seed)
    best = brute_force_hinge(S, y, 2.0)
    res = optimize_frank_wolfe(S, y, 2.0, global_cfg(2.0, 1e-4), max_iter=3000)
    w = res.weights.weights[0]
    ys = S * y[:, None]
    g = -ys[ys @ w < 1.0].sum(axis=0) / len(y)
    gap = g @ (w - lp_lmo(g, 2.0))
    assert res.objective - gap <= best + 1e-9
    if res.converged:
        assert res.objective <= best + 1e-4 + 1e-9


def test_ip_local_mode_reaches_row_optimum(rng):
    S = rng.normal(size=(60, 3)) * 0.3
    y = np.where(rng.random(60) < 0.7, 1.0, -1.0)
    X = rng.normal(size=(60, 2))
    res = optimize_interior_point(S, X, y, OptimizerConfig(p_base=2.0, locality_k=5))
    assert res.hinge <= exact_local_hinge(S, y, res.weights.local_p) + 5e-3


def test_ip_feasible_every_epoch(monkeypatch, rng):
    monkeypatch.setenv(CHECK_ENV, "1")
    S = rng.normal(size=(80, 4))
    y = np.where(rng.random(80) < 0.5, 1.0, -1.0)
    X = rng.normal(size=(80, 3))
    worst = []

    def cb(epoch, W, P, F):
        worst.append(np.max(lp_norm(W, P) - 1))

    for p in P_GRID:
        optimize_interior_point(S, X, y, OptimizerConfig(p_base=p, locality_k=5), callback=cb)
    assert worst and max(worst) <= 1e-9


def test_ip_rejects_bad_input():
    with pytest.raises(InvalidInput):
        optimize_interior_point(np.ones((3, 2)), None, np.array([1, 0, 1]), global_cfg(2.0))
    with pytest.raises(InvalidInput):
        optimize_interior_point(np.full((3, 2), np.nan), None, np.ones(3), global_cfg(2.0))
    with pytest.raises(InvalidInput):
        OptimizerConfig(p_base=1.0)


def test_ip_runtime_roughly_linear():
    def run(n):
        rng = np.random.default_rng(0)
        S, X = rng.normal(size=(n, 4)), rng.normal(size=(n, 2))
        y = np.where(rng.random(n) < 0.8, 1.0, -1.0)
        t0 = time.perf_counter()
        optimize_interior_point(S, X, y, OptimizerConfig(p_base=2.0, max_epochs=15))
        return time.perf_counter() - t0
    run(200)
    small, big = min(run(500) for _ in range(2)), min(run(4000) for _ in range(2))
    assert big / small < 8 * 3


# -- Frank-Wolfe

@given(arrays(np.float64, st.integers(1, 5), elements=st.floats(-10, 10, allow_nan=False,
                                                                allow_subnormal=False)),
       st.sampled_from(P_GRID))
def test_lmo_is_dual_norm_minimiser(g, p):
    v = lp_lmo(g, p)
    if not np.any(g):
        assert not np.any(v)
        return
    q = p / (p - 1)
    assert lp_norm(v, p) <= 1 + 1e-9
    assert np.isclose(g @ v, -np.linalg.norm(g, ord=q), rtol=1e-6, atol=1e-12)


def test_fw_one_dimensional():
    S = np.array([[1.0], [2.0], [0.5]])
    res = optimize_frank_wolfe(S, np.ones(3), 2.0, max_iter=500)
    assert np.isclose(res.weights.weights[0, 0], 1.0, atol=1e-2)
    res = optimize_frank_wolfe(-S, np.ones(3), 2.0, max_iter=500)
    assert np.isclose(res.weights.weights[0, 0], -1.0, atol=1e-2)


def test_fw_requires_p_above_one():
    with pytest.raises(InvalidInput):
        optimize_frank_wolfe(np.ones((3, 2)), np.ones(3), 1.0)


# -- deployment

def make_model(W, anchors, shared=False, P=2.0):
    n, d = W.shape
    ws = LocalWeightSet(weights=W, local_p=np.full(n, P), anchor_features=anchors, shared=shared)
    norm = NormalizerState(mean=np.zeros(d), std=np.ones(d))
    return FusionModel(learners=tuple(range(d)), learner_ids=tuple(map(str, range(d))),
                       normalizer=norm, weight_set=ws, threshold=0.0, mode="pure_rpau",
                       fusion_input=FusionInput.ZSCORED)


def zs(values):
    return ScoreMatrix(np.atleast_2d(values), ("a", "b"), Stage.ZSCORED)


def test_fuse_scores_examples():
    m = make_model(np.array([[1.0, 0.0]]), np.zeros((1, 1)), shared=True)
    assert np.allclose(fuse_scores(m, zs([0.7, -3.0])), [0.7])
    W = np.array([[1.0, 0.0], [0.0, 1.0]])
    m = make_model(W, np.array([[0.0], [10.0]]))
    out = fuse_scores(m, zs([[0.2, 0.9], [0.2, 0.9]]), np.array([[0.0], [9.0]]))
    assert np.allclose(out, [0.2, 0.9])


def test_uniform_weights_reproduce_sum_ranking(rng):
    S = rng.normal(size=(50, 2))
    m = make_model(np.full((1, 2), 0.5), np.zeros((1, 1)), shared=True)
    assert np.array_equal(np.argsort(fuse_scores(m, zs(S))), np.argsort(S.sum(axis=1)))


def test_fuse_scores_errors():
    m = make_model(np.eye(2), np.array([[0.0], [1.0]]))
    with pytest.raises(InvalidInput):
        fuse_scores(m, zs([[0.1, 0.2]]))
    with pytest.raises(InvalidInput):
        fuse_scores(m, ScoreMatrix(np.ones((1, 3)), ("a", "b", "c"), Stage.ZSCORED), [[0.0]])


def test_baseline_fuse():
    S = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert np.allclose(baseline_fuse(S), [3.0, 2.0])
    assert np.allclose(baseline_fuse(S, "single_best", 1), [2.0, -1.0])
    with pytest.raises(InvalidInput):
        baseline_fuse(S, "single_best", 5)
    with pytest.raises(InvalidInput):
        baseline_fuse(S, "median")


def test_deployment_weights_inherit_and_rescale():
    S = np.array([[0.5, 0.5], [0.0, 0.0], [0.4, 0.1]])
    W = np.array([[0.3, 0.3], [0.0, 0.0], [0.2, 0.1]])
    ws = LocalWeightSet(W, np.full(3, 2.0), np.array([[0.0], [0.1], [5.0]]))
    out = deployment_weights(ws, S, np.ones(3))
    assert np.allclose(lp_norm(out.weights, 2.0), 1.0)
    assert np.allclose(out.weights[1], out.weights[0])
    assert np.allclose(out.weights[2], W[2] / np.linalg.norm(W[2]))
    shared = LocalWeightSet(W, np.full(3, 2.0), np.zeros((3, 1)), shared=True)
    assert deployment_weights(shared, S, np.ones(3)) is shared
