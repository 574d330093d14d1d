import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from lpfusion.errors import InsufficientData, InvalidInput
from lpfusion.scorespace import (NormalizerState, ScoreMatrix, Stage, apply_zscore,
                                 fit_trimmed_range, fit_zscore, generate_pseudo_negatives,
                                 inverse_zscore, range_scale, trimmed_minmax)

vals = st.floats(-1e3, 1e3, allow_nan=False)


def raw(v, ids=None):
    v = np.asarray(v, float)
    if v.ndim == 1:
        v = v[:, None]
    return ScoreMatrix(v, ids or tuple(f"l{j}" for j in range(v.shape[1])))


def test_score_matrix_validation():
    with pytest.raises(InvalidInput):
        raw([[1.0, np.inf]])
    with pytest.raises(InvalidInput):
        ScoreMatrix(np.ones((2, 2)), ("a",))
    with pytest.raises(InvalidInput):
        ScoreMatrix(np.ones((0, 2)), ("a", "b"))


def test_zscore_examples():
    st_ = fit_zscore(raw([[0.0, 5.0], [2.0, 5.0]]))
    assert st_.mean.tolist() == [1.0, 5.0]
    assert st_.std.tolist() == [1.0, 1e-12]
    Z = apply_zscore(st_, raw([[1.0, 5.0], [3.0, 5.0]]))
    assert Z.stage is Stage.ZSCORED
    assert Z.values.tolist() == [[0.0, 0.0], [2.0, 0.0]]


def test_zscore_needs_two_rows():
    with pytest.raises(InsufficientData):
        fit_zscore(raw([[1.0]]))


def test_stage_transitions_are_checked():
    S = raw(np.arange(6.0).reshape(3, 2))
    state = fit_zscore(S)
    Z = apply_zscore(state, S)
    with pytest.raises(InvalidInput):
        apply_zscore(state, Z)
    with pytest.raises(InvalidInput):
        trimmed_minmax(fit_trimmed_range(state, Z, 5), S)
    with pytest.raises(InvalidInput):
        generate_pseudo_negatives(S)
    with pytest.raises(InvalidInput):
        trimmed_minmax(state, Z)


@given(arrays(float, st.tuples(st.integers(2, 30), st.integers(1, 4)), elements=vals))
def test_zscore_train_mean_zero_and_inverse(v):
    S = raw(v)
    state = fit_zscore(S)
    Z = apply_zscore(state, S)
    ok = state.std > 1e-6
    assert np.all(np.abs(Z.values.mean(0)[ok]) <= 1e-9)
    back = inverse_zscore(state, Z)
    assert np.allclose(back.values[:, ok], v[:, ok], atol=1e-9, rtol=1e-12)


def test_trimmed_minmax_examples():
    v = np.arange(101.0)
    state = NormalizerState(mean=np.zeros(1), std=np.ones(1))
    Z = ScoreMatrix(v[:, None], ("a",), Stage.ZSCORED)
    st10 = fit_trimmed_range(state, Z, 10)
    assert (st10.lower[0], st10.upper[0]) == (10.0, 90.0)
    out = trimmed_minmax(st10, ScoreMatrix(np.array([[50.0], [10.0], [90.0], [-3.0]]), ("a",),
                                            Stage.ZSCORED))
    assert out.values[:, 0].tolist() == [0.5, 0.0, 1.0, 0.0]
    assert out.stage is Stage.NORMALIZED


def test_trimmed_minmax_degenerate_gap():
    state = NormalizerState(np.zeros(1), np.ones(1), 5, np.array([2.0]), np.array([2.0]))
    Z = ScoreMatrix(np.array([[1.0], [2.0], [7.0]]), ("a",), Stage.ZSCORED)
    assert trimmed_minmax(state, Z).values[:, 0].tolist() == [0.5, 0.5, 0.5]


def test_rho_range_checked():
    state = NormalizerState(np.zeros(1), np.ones(1))
    Z = ScoreMatrix(np.arange(5.0)[:, None], ("a",), Stage.ZSCORED)
    for rho in (0, 11, 2.5):
        with pytest.raises(InvalidInput):
            fit_trimmed_range(state, Z, rho)


@given(arrays(float, st.tuples(st.integers(2, 40), st.integers(1, 3)), elements=vals),
       arrays(float, st.tuples(st.integers(1, 10), st.just(1)), elements=vals),
       st.integers(1, 10))
def test_trimmed_minmax_in_unit_interval(train, test, rho):
    Z = ScoreMatrix(train, tuple("abc"[: train.shape[1]]), Stage.ZSCORED)
    state = fit_trimmed_range(NormalizerState(np.zeros(Z.d), np.ones(Z.d)), Z, rho)
    T = ScoreMatrix(np.repeat(test, Z.d, axis=1), Z.learner_ids, Stage.ZSCORED)
    out = trimmed_minmax(state, T).values
    assert np.all((out >= 0) & (out <= 1))


def test_range_scale_unclipped_is_affine():
    x = np.array([-1.0, 0.0, 0.5, 3.0])
    assert range_scale(x, 0.0, 2.0, clip=False).tolist() == [-0.5, 0.0, 0.25, 1.5]


def test_pseudo_negatives_examples():
    Z = ScoreMatrix(np.array([[1.2, -0.3], [0.1, 0.2], [0.0, 1.0], [2.0, 2.0]]), ("a", "b"),
                    Stage.ZSCORED)
    stacked, labels = generate_pseudo_negatives(Z, 0.5, seed=3)
    assert stacked.n == 6
    assert labels.tolist() == [1, 1, 1, 1, -1, -1]
    assert np.array_equal(stacked.values[:4], Z.values)
    for row in stacked.values[4:]:
        assert any(np.array_equal(row, -z) for z in Z.values)
    again, _ = generate_pseudo_negatives(Z, 0.5, seed=3)
    assert np.array_equal(again.values, stacked.values)
    one = ScoreMatrix(np.array([[1.2, -0.3], [5.0, 5.0]]), ("a", "b"), Stage.ZSCORED)
    out, _ = generate_pseudo_negatives(one, 1.0, seed=0)
    assert [-1.2, 0.3] in out.values.tolist()


@given(st.integers(2, 50), st.floats(0.01, 1.0), st.integers(0, 1000))
def test_pseudo_negative_count_and_no_mutation(n, frac, seed):
    v = np.random.default_rng(seed).normal(size=(n, 3))
    Z = ScoreMatrix(v.copy(), ("a", "b", "c"), Stage.ZSCORED)
    stacked, labels = generate_pseudo_negatives(Z, frac, seed)
    k = int(np.ceil(frac * n))
    assert stacked.n == n + k and (labels == -1).sum() == k
    assert np.array_equal(Z.values, v)


def test_pseudo_negative_errors():
    Z = ScoreMatrix(np.ones((1, 2)), ("a", "b"), Stage.ZSCORED)
    with pytest.raises(InsufficientData):
        generate_pseudo_negatives(Z)
    Z = ScoreMatrix(np.ones((3, 2)), ("a", "b"), Stage.ZSCORED)
    with pytest.raises(InvalidInput):
        generate_pseudo_negatives(Z, 0.0)
