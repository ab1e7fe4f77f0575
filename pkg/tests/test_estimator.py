import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tedfam.baseline import bilinear_scores, bilinear_signal
from tedfam.core import (
    DegenerateInputError,
    DimensionError,
    MatrixSeries,
    MomentPair,
    ValidationError,
)
from tedfam.estimator import (
    compute_moments,
    default_k_max,
    estimate_loadings,
    estimate_rank,
    estimate_scores,
    fit,
    reconstruct_signal,
    reconstruct_signal_expanded,
)
from tedfam.metrics import space_distance
from tedfam.simulate import ScenarioConfig, generate_scenario

SQRT2 = np.sqrt(2.0)
E11 = np.array([[1.0, 0.0], [0.0, 0.0]])
ANTI = np.array([[0.0, 1.0], [1.0, 0.0]])


def _moments_bruteforce(X):
    T, p1, p2 = X.shape
    M1 = np.zeros((p1, p1))
    M2 = np.zeros((p2, p2))
    for t in range(T):
        for i in range(p1):
            for k in range(p1):
                M1[i, k] += sum(X[t, i, j] * X[t, k, j] for j in range(p2))
        for j in range(p2):
            for l in range(p2):
                M2[j, l] += sum(X[t, i, j] * X[t, i, l] for i in range(p1))
    return M1 / (T * p1 * p2), M2 / (T * p1 * p2)


def _e11_loadings():
    return estimate_loadings(compute_moments(MatrixSeries(E11)), 1, 1)


# compute_moments

def test_moments_hand_example():
    m = compute_moments(MatrixSeries(E11))
    np.testing.assert_array_equal(m.M1, [[0.25, 0], [0, 0]])
    np.testing.assert_array_equal(m.M2, [[0.25, 0], [0, 0]])


def test_moments_zero_input():
    m = compute_moments(MatrixSeries(np.zeros((3, 4, 5))))
    assert not m.M1.any() and not m.M2.any()
    assert m.M1.shape == (4, 4) and m.M2.shape == (5, 5)


def test_moments_duplicate_observations():
    m = compute_moments(MatrixSeries(np.stack([E11, E11])))
    np.testing.assert_array_equal(m.M1, [[0.25, 0], [0, 0]])


def test_moments_match_bruteforce():
    X = np.random.default_rng(3).standard_normal((4, 3, 5))
    m = compute_moments(MatrixSeries(X))
    M1, M2 = _moments_bruteforce(X)
    np.testing.assert_allclose(m.M1, M1, atol=1e-14)
    np.testing.assert_allclose(m.M2, M2, atol=1e-14)


def test_moments_bit_reproducible():
    X = np.random.default_rng(4).standard_normal((30, 8, 6))
    a, b = compute_moments(MatrixSeries(X)), compute_moments(MatrixSeries(X))
    np.testing.assert_array_equal(a.M1, b.M1)
    np.testing.assert_array_equal(a.M2, b.M2)


# estimate_loadings

def test_loadings_hand_example():
    lp = estimate_loadings(MomentPair(np.diag([0.25, 0.0]), np.diag([0.25, 0.0])), 1, 1)
    np.testing.assert_allclose(lp.R[:, 0], [SQRT2, 0.0])
    np.testing.assert_allclose(lp.eigvals_row, [0.25])


def test_loadings_reject_k_equal_p():
    with pytest.raises(DimensionError):
        estimate_loadings(MomentPair(np.diag([4.0, 1.0]), np.diag([4.0, 1.0])), 2, 1)
    with pytest.raises(DimensionError):
        estimate_loadings(MomentPair(np.diag([4.0, 1.0]), np.diag([4.0, 1.0])), 1, 0)


def test_loadings_closed_form_2x2():
    M = np.array([[2.0, 1.0], [1.0, 2.0]])
    lp = estimate_loadings(MomentPair(M, M), 1, 1)
    np.testing.assert_allclose(lp.R[:, 0], [1.0, 1.0], atol=1e-14)


# estimate_scores

def test_scores_hand_example():
    sc = estimate_scores(MatrixSeries(E11), _e11_loadings())
    np.testing.assert_allclose(sc.Z[0], [[-0.5]])
    np.testing.assert_allclose(sc.F[0][:, 0], [SQRT2 / 2, 0.0])
    np.testing.assert_allclose(sc.E[0][:, 0], [SQRT2 / 2, 0.0])


def test_scores_zero_input():
    sc = estimate_scores(MatrixSeries(np.zeros((2, 2, 2))), _e11_loadings())
    assert not sc.Z.any() and not sc.E.any() and not sc.F.any()


def test_scores_antidiagonal():
    sc = estimate_scores(MatrixSeries(ANTI), _e11_loadings())
    np.testing.assert_allclose(sc.Z[0], [[0.0]])
    np.testing.assert_allclose(sc.F[0][:, 0], [0.0, SQRT2 / 2])
    np.testing.assert_allclose(sc.E[0][:, 0], [0.0, SQRT2 / 2])


def test_scores_dimension_mismatch():
    with pytest.raises(ValidationError):
        estimate_scores(MatrixSeries(np.zeros((1, 3, 2))), _e11_loadings())


# reconstruct_signal

def test_signal_hand_examples():
    lp = _e11_loadings()
    np.testing.assert_allclose(reconstruct_signal(MatrixSeries(E11), lp).data[0], E11, atol=1e-15)
    np.testing.assert_allclose(reconstruct_signal(MatrixSeries(ANTI), lp).data[0], ANTI, atol=1e-15)
    assert not reconstruct_signal(MatrixSeries(np.zeros((1, 2, 2))), lp).data.any()


def _random_fit(seed, T=6, p1=7, p2=5, k1=2, k2=3):
    X = np.random.default_rng(seed).standard_normal((T, p1, p2))
    return MatrixSeries(X), fit(MatrixSeries(X), k1, k2)


@pytest.mark.parametrize("seed", range(10))
def test_signal_forms_agree(seed):
    series, res = _random_fit(seed)
    a = reconstruct_signal(series, res.loadings).data
    b = reconstruct_signal_expanded(series, res.loadings).data
    assert np.max(np.abs(a - b)) <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_signal_idempotent(seed):
    series, res = _random_fit(seed)
    S = reconstruct_signal(series, res.loadings)
    np.testing.assert_allclose(reconstruct_signal(S, res.loadings).data, S.data, atol=1e-10)


def test_signal_equals_three_term_sum_of_scores():
    series, res = _random_fit(11)
    R, C = res.loadings.R, res.loadings.C
    sc = res.scores
    S = R @ sc.Z @ C.T + R @ np.swapaxes(sc.E, 1, 2) + sc.F @ C.T
    np.testing.assert_allclose(S, res.signal.data, atol=1e-10)


# fit

def test_fit_hand_pipeline():
    res = fit(MatrixSeries(E11), 1, 1)
    np.testing.assert_allclose(res.loadings.R[:, 0], [SQRT2, 0.0])
    np.testing.assert_allclose(res.loadings.C[:, 0], [SQRT2, 0.0])
    np.testing.assert_allclose(res.scores.Z[0], [[-0.5]])
    np.testing.assert_allclose(res.signal.data[0], E11, atol=1e-15)
    np.testing.assert_allclose(res.all_eigvals_row, [0.25, 0.0])


def test_fit_duplicate_observations():
    X = np.random.default_rng(5).standard_normal((4, 5))
    res = fit(MatrixSeries(np.stack([X, X])), 2, 2)
    np.testing.assert_array_equal(res.scores.Z[0], res.scores.Z[1])
    np.testing.assert_array_equal(res.signal.data[0], res.signal.data[1])


def test_fit_orthonormal_loadings():
    _, res = _random_fit(6, T=20, p1=15, p2=12, k1=3, k2=4)
    np.testing.assert_allclose(res.loadings.R.T @ res.loadings.R / 15, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(res.loadings.C.T @ res.loadings.C / 12, np.eye(4), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100) | st.floats(-100, -0.01))
def test_fit_scale_equivariance(seed, c):
    series, res = _random_fit(seed)
    scaled = fit(series.scaled(c), 2, 3)
    assert space_distance(scaled.loadings.R, res.loadings.R) < 1e-8
    assert space_distance(scaled.loadings.C, res.loadings.C) < 1e-8
    # sign convention pins the basis, so scores scale exactly with c
    np.testing.assert_allclose(scaled.scores.Z, c * res.scores.Z, rtol=1e-8, atol=1e-10 * abs(c))


def test_scores_sign_relation_to_bilinear():
    series, res = _random_fit(7)
    np.testing.assert_array_equal(res.scores.Z, -bilinear_scores(series, res.loadings))


def test_fit_center_option():
    X = np.random.default_rng(8).standard_normal((10, 4, 3)) + 5.0
    res = fit(MatrixSeries(X), 1, 1, center=True)
    np.testing.assert_allclose(res.series.data.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(res.mean, X.mean(axis=0))
    assert not fit(MatrixSeries(X), 1, 1).centered


def test_fit_recovers_bilinear_truth_signal():
    ds = generate_scenario(ScenarioConfig("II", 100, 100, 100, seed=11))
    res = fit(ds.observations, 3, 3)
    S_hat = res.signal.data
    S_bi = bilinear_signal(ds.observations, res.loadings).data
    X = ds.observations.data
    ratio = np.linalg.norm(S_hat - S_bi, axis=(1, 2)) / np.linalg.norm(X, axis=(1, 2))
    assert ratio.mean() < 0.5


# estimate_rank

def test_rank_arithmetic_example():
    assert estimate_rank([10, 5, 1, 0.5], 3) == 2


def test_rank_geometric_tie_break():
    assert estimate_rank([8.0, 4.0, 2.0, 1.0, 0.5], 4) == 1
    assert estimate_rank([3.0 * 0.7**j for j in range(10)], 8) == 1


def test_rank_floor_dominates():
    assert estimate_rank([9, 3, 1, 0, 0, 0], 3) == 3


def test_rank_errors():
    with pytest.raises(DimensionError):
        estimate_rank([3, 2, 1], 3)
    with pytest.raises(DegenerateInputError):
        estimate_rank([0, 0, 0], 2)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(1e-3, 1e3), min_size=3, max_size=12),
    st.floats(1e-6, 1e6),
)
def test_rank_scale_invariant(values, c):
    lam = np.sort(np.array(values))[::-1]
    assume(lam[0] > 0)
    k_max = lam.size - 1
    assert estimate_rank(c * lam, k_max) == estimate_rank(lam, k_max)


def test_default_k_max():
    assert default_k_max(2) == 1
    assert default_k_max(10) == 5
    assert default_k_max(100) == 20
