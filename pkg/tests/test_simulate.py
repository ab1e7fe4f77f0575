import numpy as np
import pytest

from tedfam.core import DimensionError, RngStream, ValidationError, vec
from tedfam.metrics import nearest_kronecker_fraction, space_distance
from tedfam.simulate import (
    Scenario,
    ScenarioConfig,
    generate_factor_series,
    generate_loadings,
    generate_noise,
    generate_scenario,
)


def test_loadings_norm_p2():
    R = generate_loadings(2, 1, RngStream(3))
    assert np.linalg.norm(R) == pytest.approx(np.sqrt(2))


def test_loadings_orthonormal():
    R = generate_loadings(40, 4, RngStream(1))
    np.testing.assert_allclose(R.T @ R / 40, np.eye(4), atol=1e-10)
    with pytest.raises(DimensionError):
        generate_loadings(3, 3, RngStream(1))


def test_loadings_differ_across_seeds():
    for s in range(20):
        a = generate_loadings(50, 3, RngStream(2 * s))
        b = generate_loadings(50, 3, RngStream(2 * s + 1))
        assert space_distance(a, b) > 0


def test_factor_series_rho_zero_is_iid():
    u = generate_factor_series(4, 10, 0.0, RngStream(9))
    np.testing.assert_array_equal(u, RngStream(9).standard_normal((10, 4)))


def test_factor_series_rejects_unit_root():
    with pytest.raises(ValidationError):
        generate_factor_series(2, 10, 1.0, RngStream(0))


def _lag1(u):
    u = u - u.mean(axis=0)
    return np.sum(u[1:] * u[:-1], axis=0) / np.sum(u * u, axis=0)


def test_factor_series_autocorrelation():
    u = generate_factor_series(3, 10_000, 0.8, RngStream(21))
    assert np.all(np.abs(_lag1(u) - 0.8) < 0.03)


@pytest.mark.parametrize("rho", [0.0, 0.6, 0.8])
def test_factor_series_unit_variance(rho):
    u = generate_factor_series(3, 10_000, rho, RngStream(22))
    assert np.all(np.abs(u.var(axis=0) - 1.0) < 0.05)


def test_noise_moments():
    p1, p2, T = 20, 25, 2000  # 1e6 draws
    e = generate_noise(p1, p2, T, RngStream(5)).data
    assert abs(e.var() - 1.0) < 0.02
    row_cov = np.mean(e[:, 0, :] * e[:, 1, :])
    assert abs(row_cov - 1 / p1) < 0.02
    col_cov = np.mean(e[:, :, 0] * e[:, :, 1])
    assert abs(col_cov - 1 / p2) < 0.02
    lag = np.mean(e[1:] * e[:-1])
    assert abs(lag) < 0.02


def test_config_defaults_by_scenario():
    c1 = ScenarioConfig("I", 10, 5, 5)
    assert (c1.phi, c1.psi, c1.gamma) == (0.0, 0.0, 0.0)
    c3 = ScenarioConfig(Scenario.III, 10, 5, 5)
    assert (c3.phi, c3.psi, c3.gamma) == (0.6, 0.8, 0.8)
    c4 = ScenarioConfig("IV", 10, 5, 5, phi=0.1)
    assert (c4.phi, c4.psi, c4.gamma) == (0.1, 0.8, 0.8)
    with pytest.raises(ValidationError):
        ScenarioConfig("I", 10, 5, 5, psi=1.2)
    with pytest.raises(DimensionError):
        ScenarioConfig("I", 10, 3, 5)
    with pytest.raises(ValueError):
        ScenarioConfig("V", 10, 5, 5)


def test_scenario_deterministic():
    a = generate_scenario(ScenarioConfig("I", 20, 8, 6, seed=42))
    b = generate_scenario(ScenarioConfig("I", 20, 8, 6, seed=42))
    np.testing.assert_array_equal(a.observations.data, b.observations.data)
    np.testing.assert_array_equal(a.truth_R, b.truth_R)


def test_bilinear_without_noise_is_low_rank():
    ds = generate_scenario(ScenarioConfig("II", 10, 12, 9, seed=1, noise=False))
    for X in ds.observations.data:
        s = np.linalg.svd(X, compute_uv=False)
        assert np.all(s[3:] < 1e-8 * s[0])


@pytest.mark.parametrize("scenario", list(Scenario))
def test_decomposition_and_vec_identity(scenario):
    ds = generate_scenario(ScenarioConfig(scenario, 15, 7, 6, k1=2, k2=3, seed=3))
    X, S, e = ds.observations.data, ds.truth_signal.data, ds.noise.data
    assert np.max(np.abs((X - S) - e)) <= 1e-12
    R, C = ds.truth_R, ds.truth_C
    Z, E, F = ds.truth_factors.Z, ds.truth_factors.E, ds.truth_factors.F
    for t in range(15):
        v = np.kron(C, R) @ vec(Z[t]) + np.kron(np.eye(6), R) @ vec(E[t].T) + np.kron(C, np.eye(7)) @ vec(F[t])
        np.testing.assert_allclose(vec(S[t]), v, atol=1e-10)
    if scenario.bilinear:
        assert not E.any() and not F.any()


@pytest.mark.parametrize("scenario", ["I", "II"])
def test_uncorrelated_factors_have_no_lag_correlation(scenario):
    T = 400
    ds = generate_scenario(ScenarioConfig(scenario, T, 10, 10, seed=8))
    Z = ds.truth_factors.Z.reshape(T, -1)
    assert np.all(np.abs(_lag1(Z)) < 3 / np.sqrt(T))


def test_correlated_scenario_factor_autocorrelation():
    T = 4000
    ds = generate_scenario(ScenarioConfig("III", T, 4, 4, k1=1, k2=1, seed=2))
    assert abs(_lag1(ds.truth_factors.Z.reshape(T, -1))[0] - 0.6) < 0.05
    assert np.all(np.abs(_lag1(ds.truth_factors.F.reshape(T, -1)) - 0.8) < 0.05)


def test_draw_order_frozen():
    cfg = ScenarioConfig("I", 5, 4, 3, k1=2, k2=1, seed=77)
    ds = generate_scenario(cfg)
    rng = RngStream(77)
    R = generate_loadings(4, 2, rng)
    C = generate_loadings(3, 1, rng)
    z = generate_factor_series(2, 5, 0.0, rng)
    np.testing.assert_array_equal(ds.truth_R, R)
    np.testing.assert_array_equal(ds.truth_C, C)
    np.testing.assert_array_equal(ds.truth_factors.Z[:, :, 0], z)


def test_separable_covariance():
    T, p = 2000, 10
    ds = generate_scenario(ScenarioConfig("I", T, p, p, seed=7))
    V = np.stack([vec(x) for x in ds.observations.data])
    assert nearest_kronecker_fraction(V.T @ V / T, p, p) >= 0.95
