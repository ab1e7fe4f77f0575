"""Data-generating processes for the four simulation scenarios.

Scenario I   uncorrelated factors, three-term signal
Scenario II  uncorrelated factors, bilinear signal only
Scenario III AR(1) factors with (phi, psi, gamma) = (0.6, 0.8, 0.8), three-term signal
Scenario IV  AR(1) factors as in III, bilinear signal only

Random draws happen in a fixed order: R, C, the Z series, the F series, the
E series, then the noise.  Every ``vec`` is column-major.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionError,
    FactorScores,
    MatrixSeries,
    RngStream,
    ValidationError,
    symmetric_sqrt,
)

__all__ = [
    "Scenario",
    "ScenarioConfig",
    "SimulatedDataset",
    "generate_loadings",
    "generate_factor_series",
    "noise_covariances",
    "generate_noise",
    "generate_scenario",
]


class Scenario(str, enum.Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"

    @property
    def correlated(self) -> bool:
        return self in (Scenario.III, Scenario.IV)

    @property
    def bilinear(self) -> bool:
        return self in (Scenario.II, Scenario.IV)


UNCORRELATED_AR = (0.0, 0.0, 0.0)
CORRELATED_AR = (0.6, 0.8, 0.8)


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions, AR coefficients and seed for one simulated dataset.

    ``phi``, ``psi`` and ``gamma`` drive the Z, F and E series.  Left as
    ``None`` they take the scenario defaults.  ``noise=False`` drops the
    matrix-normal noise (for testing only).
    """

    scenario: Scenario
    T: int
    p1: int
    p2: int
    k1: int = 3
    k2: int = 3
    phi: float | None = None
    psi: float | None = None
    gamma: float | None = None
    seed: int = 0
    noise: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        defaults = CORRELATED_AR if self.scenario.correlated else UNCORRELATED_AR
        for name, default in zip(("phi", "psi", "gamma"), defaults):
            value = getattr(self, name)
            value = default if value is None else float(value)
            if not -1.0 < value < 1.0:
                raise ValidationError(f"{name} must lie in (-1, 1), got {value}")
            object.__setattr__(self, name, value)
        if self.T < 1:
            raise ValidationError(f"T must be positive, got {self.T}")
        if self.p1 < 2 or self.p2 < 2:
            raise DimensionError(f"p1, p2 must be >= 2, got ({self.p1}, {self.p2})")
        if not 1 <= self.k1 < self.p1:
            raise DimensionError(f"k1 must satisfy 1 <= k1 < p1, got k1={self.k1}, p1={self.p1}")
        if not 1 <= self.k2 < self.p2:
            raise DimensionError(f"k2 must satisfy 1 <= k2 < p2, got k2={self.k2}, p2={self.p2}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True, eq=False)
class SimulatedDataset:
    """Observations together with the ground truth that produced them.

    For the bilinear scenarios ``truth_factors.E`` and ``truth_factors.F`` are
    zero, so the three-term formula reproduces ``truth_signal`` in every
    scenario.
    """

    config: ScenarioConfig
    observations: MatrixSeries
    truth_signal: MatrixSeries
    noise: MatrixSeries
    truth_R: np.ndarray
    truth_C: np.ndarray
    truth_factors: FactorScores

    @property
    def truth_loadings(self) -> tuple[np.ndarray, np.ndarray]:
        return self.truth_R, self.truth_C


def generate_loadings(p: int, k: int, rng: RngStream) -> np.ndarray:
    """``sqrt(p)`` times the top-k left singular vectors of a p x k Gaussian matrix."""
    if not 1 <= k < p:
        raise DimensionError(f"need 1 <= k < p, got k={k}, p={p}")
    G = rng.standard_normal((p, k))
    U, _, _ = np.linalg.svd(G, full_matrices=False)
    return np.sqrt(p) * U[:, :k]


def generate_factor_series(dim: int, T: int, rho: float, rng: RngStream) -> np.ndarray:
    """Stationary VAR(1) ``u_t = rho u_{t-1} + sqrt(1 - rho^2) eps_t``, shape ``(T, dim)``.

    The first vector is standard normal, so every coordinate has unit
    marginal variance at every t.
    """
    if not -1.0 < rho < 1.0:
        raise ValidationError(f"rho must lie in (-1, 1), got {rho}")
    eps = rng.standard_normal((T, dim))
    if rho == 0.0:
        return eps
    u = np.empty_like(eps)
    u[0] = eps[0]
    s = np.sqrt(1.0 - rho * rho)
    for t in range(1, T):
        u[t] = rho * u[t - 1] + s * eps[t]
    return u


def noise_covariances(p1: int, p2: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column noise covariances: unit diagonal, off-diagonal ``1/p1`` and ``1/p2``."""
    U = np.full((p1, p1), 1.0 / p1)
    np.fill_diagonal(U, 1.0)
    V = np.full((p2, p2), 1.0 / p2)
    np.fill_diagonal(V, 1.0)
    return U, V


def generate_noise(p1: int, p2: int, T: int, rng: RngStream) -> MatrixSeries:
    """Matrix-normal noise ``U^{1/2} G_t V^{1/2}`` with i.i.d. standard normal ``G_t``."""
    if p1 < 2 or p2 < 2:
        raise DimensionError(f"p1, p2 must be >= 2, got ({p1}, {p2})")
    U, V = noise_covariances(p1, p2)
    U_half = symmetric_sqrt(U)
    V_half = symmetric_sqrt(V)
    G = rng.standard_normal((T, p1, p2))
    return MatrixSeries(U_half @ G @ V_half)


def generate_scenario(config: ScenarioConfig) -> SimulatedDataset:
    cfg = config
    T, p1, p2, k1, k2 = cfg.T, cfg.p1, cfg.p2, cfg.k1, cfg.k2
    rng = RngStream(cfg.seed)

    R = generate_loadings(p1, k1, rng)
    C = generate_loadings(p2, k2, rng)
    # vec is column-major, so each row of the VAR output reshapes with order="F"
    Z = generate_factor_series(k1 * k2, T, cfg.phi, rng).reshape(T, k2, k1).transpose(0, 2, 1)
    F = generate_factor_series(p1 * k2, T, cfg.psi, rng).reshape(T, k2, p1).transpose(0, 2, 1)
    E = generate_factor_series(p2 * k1, T, cfg.gamma, rng).reshape(T, k1, p2).transpose(0, 2, 1)
    noise = generate_noise(p1, p2, T, rng).data
    if not cfg.noise:
        noise = np.zeros_like(noise)

    if cfg.scenario.bilinear:
        E = np.zeros_like(E)
        F = np.zeros_like(F)
    S = R @ Z @ C.T + R @ np.swapaxes(E, 1, 2) + F @ C.T
    X = S + noise

    if np.max(np.abs((X - S) - noise)) > 1e-12 * max(1.0, float(np.max(np.abs(X)))):
        raise AssertionError("observations do not decompose into signal plus noise")

    return SimulatedDataset(
        config=cfg,
        observations=MatrixSeries(X),
        truth_signal=MatrixSeries(S),
        noise=MatrixSeries(noise),
        truth_R=_readonly(R),
        truth_C=_readonly(C),
        truth_factors=FactorScores(Z=Z, E=E, F=F),
    )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a
