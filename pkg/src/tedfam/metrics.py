"""Evaluation measures: subspace distance, RMSE, PSNR, alignment and rotation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .core import (
    DegenerateInputError,
    DimensionError,
    MatrixSeries,
    NumericalError,
    ValidationError,
    column_signs,
    symmetric_sqrt,
)

__all__ = [
    "EvalReport",
    "NormalityReport",
    "space_distance",
    "rmse_signal",
    "mse",
    "psnr",
    "psnr_series",
    "procrustes_align",
    "normality_diagnostic",
    "correlation_matrix",
    "correlation_distance",
    "varimax_criterion",
    "varimax",
    "nearest_kronecker_fraction",
    "evaluate",
]

RANK_TOL = 1e-12


def _data(x) -> np.ndarray:
    return x.data if isinstance(x, MatrixSeries) else np.asarray(x, dtype=np.float64)


def _projector(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    gram = A.T @ A
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[-1] <= RANK_TOL * max(s[0], 1e-300):
        raise NumericalError(f"matrix of shape {A.shape} is not of full column rank")
    return A @ np.linalg.solve(gram, A.T)


def space_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Spectral norm of the difference between the column-space projectors of A and B."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[0] != B.shape[0]:
        raise DimensionError(f"incompatible shapes {A.shape} and {B.shape}")
    D = _projector(A) - _projector(B)
    D = 0.5 * (D + D.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(D))))


def rmse_signal(estimated, truth) -> float:
    """``sqrt(sum_t ||est_t - truth_t||_F^2 / (T p1 p2))``.

    Pass the observations as ``truth`` to get the reconstruction RMSE.
    """
    a, b = _data(estimated), _data(truth)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mse(x: np.ndarray, x_hat: np.ndarray) -> float:
    x, x_hat = np.asarray(x, dtype=np.float64), np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValidationError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return float(np.mean((x - x_hat) ** 2))


def psnr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB, peak taken as ``max |x|``.

    Returns ``math.inf`` for a perfect reconstruction.
    """
    x = np.asarray(x, dtype=np.float64)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0:
        raise DegenerateInputError("PSNR undefined: reference matrix is all zeros")
    err = mse(x, x_hat)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / err)


def psnr_series(observations, estimated) -> np.ndarray:
    X, S = _data(observations), _data(estimated)
    if X.shape != S.shape:
        raise ValidationError(f"shape mismatch: {X.shape} vs {S.shape}")
    return np.array([psnr(x, s) for x, s in zip(X, S)])


def procrustes_align(estimate: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Orthogonal ``H`` minimizing ``||estimate - truth @ H||_F``.

    ``H`` is the polar factor of ``truth.T @ estimate / p``.
    """
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape or estimate.ndim != 2:
        raise DimensionError(f"incompatible shapes {estimate.shape} and {truth.shape}")
    cross = truth.T @ estimate / truth.shape[0]
    U, s, Vt = np.linalg.svd(cross)
    if s[-1] <= RANK_TOL * max(s[0], 1e-300):
        raise NumericalError("cross product is rank deficient; alignment is not unique")
    return U @ Vt


@dataclass(frozen=True, eq=False)
class NormalityReport:
    standardized: np.ndarray
    mean: np.ndarray
    sample_cov: np.ndarray
    cov_rel_error: np.ndarray
    statistics: np.ndarray
    pvalues: np.ndarray
    degenerate: bool

    @property
    def max_cov_rel_error(self) -> float:
        return float(np.max(self.cov_rel_error))


def normality_diagnostic(samples: np.ndarray, expected_cov: np.ndarray, min_samples: int = 50) -> NormalityReport:
    """Compare samples with a zero-mean Gaussian of covariance ``expected_cov``.

    Samples are whitened with the symmetric inverse square root of
    ``expected_cov``; the covariance error of entry (i, j) is
    ``|S_ij - Sigma_ij| / sqrt(Sigma_ii Sigma_jj)``.  Each whitened
    coordinate gets a Shapiro-Wilk test.
    """
    X = np.asarray(samples, dtype=np.float64)
    Sigma = np.asarray(expected_cov, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("samples must be an (n, k) array")
    n, k = X.shape
    if n < min_samples:
        raise ValidationError(f"need at least {min_samples} samples, got {n}")
    if Sigma.shape != (k, k):
        raise DimensionError(f"expected_cov must be {k} x {k}, got {Sigma.shape}")

    W = np.linalg.inv(symmetric_sqrt(Sigma))
    Zs = X @ W
    S = np.atleast_2d(np.cov(X, rowvar=False))
    scale = np.sqrt(np.outer(np.diag(Sigma), np.diag(Sigma)))
    rel = np.abs(S - Sigma) / scale

    s_eig = np.linalg.eigvalsh(S)
    degenerate = bool(s_eig[-1] <= 0 or s_eig[0] <= 1e-12 * s_eig[-1])
    if degenerate:
        stat = np.full(k, np.nan)
        pval = np.full(k, np.nan)
    else:
        res = [stats.shapiro(Zs[:, j]) for j in range(k)]
        stat = np.array([r.statistic for r in res])
        pval = np.array([r.pvalue for r in res])
    return NormalityReport(
        standardized=Zs,
        mean=Zs.mean(axis=0),
        sample_cov=np.atleast_2d(np.cov(Zs, rowvar=False)),
        cov_rel_error=rel,
        statistics=stat,
        pvalues=pval,
        degenerate=degenerate,
    )


_MODES = ("row", "column", "vectorized")


def correlation_matrix(series, mode: str) -> np.ndarray:
    """Sample correlation matrix of a matrix series.

    ``row``: p1 x p1, correlating rows with samples pooled over (t, column).
    ``column``: p2 x p2, pooled over (t, row).
    ``vectorized``: (p1 p2) x (p1 p2) across t, entries in column-major order.
    """
    X = _data(series)
    if X.ndim != 3:
        raise DimensionError("expected a (T, p1, p2) series")
    T, p1, p2 = X.shape
    if T < 2:
        raise ValidationError("correlation needs at least two observations")
    if mode == "row":
        V = np.transpose(X, (1, 0, 2)).reshape(p1, T * p2)
        labels = [f"row {i}" for i in range(p1)]
    elif mode == "column":
        V = np.transpose(X, (2, 0, 1)).reshape(p2, T * p1)
        labels = [f"column {j}" for j in range(p2)]
    elif mode == "vectorized":
        V = np.transpose(X, (2, 1, 0)).reshape(p1 * p2, T)
        labels = [f"entry ({i}, {j})" for j in range(p2) for i in range(p1)]
    else:
        raise ValidationError(f"mode must be one of {_MODES}, got {mode!r}")
    Vc = V - V.mean(axis=1, keepdims=True)
    ss = np.einsum("ij,ij->i", Vc, Vc)
    tol = 1e-24 * max(1.0, float(np.max(np.abs(V))) ** 2) * V.shape[1]
    bad = np.flatnonzero(ss <= tol)
    if bad.size:
        raise DegenerateInputError(f"zero variance in {labels[bad[0]]}")
    norm = np.sqrt(ss)
    corr = (Vc @ Vc.T) / np.outer(norm, norm)
    return np.clip(0.5 * (corr + corr.T), -1.0, 1.0)


def correlation_distance(series_a, series_b, mode: str = "row") -> float:
    """Frobenius norm of the difference of the two series' correlation matrices."""
    a, b = _data(series_a), _data(series_b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(correlation_matrix(a, mode) - correlation_matrix(b, mode)))


def varimax_criterion(L: np.ndarray) -> float:
    """Sum over columns of the variance of the squared loadings."""
    L2 = np.asarray(L, dtype=np.float64) ** 2
    return float(np.sum(np.mean(L2**2, axis=0) - np.mean(L2, axis=0) ** 2))


def varimax(loading: np.ndarray, normalize: bool = False, tol: float = 1e-8, max_sweeps: int = 1000):
    """Varimax rotation by sweeps of planar rotations.

    Returns ``(rotated, rotation)`` with ``rotated = loading @ rotation``.
    Columns of the result are sign-fixed so their largest entry is positive.
    With ``normalize`` the rows are scaled to unit length during the
    optimisation (Kaiser normalization).
    """
    A = np.asarray(loading, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] < 1:
        raise DimensionError(f"loading must be a p x k matrix with k >= 1, got shape {A.shape}")
    p, k = A.shape
    if normalize:
        h = np.linalg.norm(A, axis=1)
        h[h == 0] = 1.0
        B = A / h[:, None]
    else:
        B = A.copy()
    rot = np.eye(k)
    crit = varimax_criterion(B)
    for _ in range(max_sweeps):
        for i in range(k - 1):
            for j in range(i + 1, k):
                x, y = B[:, i], B[:, j]
                u = x * x - y * y
                v = 2.0 * x * y
                num = 2.0 * (u @ v - u.sum() * v.sum() / p)
                den = (u @ u - v @ v) - (u.sum() ** 2 - v.sum() ** 2) / p
                theta = 0.25 * np.arctan2(num, den)
                c, s = np.cos(theta), np.sin(theta)
                G = np.array([[c, -s], [s, c]])
                B[:, [i, j]] = B[:, [i, j]] @ G
                rot[:, [i, j]] = rot[:, [i, j]] @ G
        new = varimax_criterion(B)
        if new - crit < tol:
            crit = new
            break
        crit = new
    # re-orthogonalise to remove drift accumulated over many planar rotations
    U, _, Vt = np.linalg.svd(rot)
    rot = U @ Vt
    rotated = A @ rot
    signs = column_signs(rotated)
    return rotated * signs, rot * signs


def nearest_kronecker_fraction(cov: np.ndarray, p1: int, p2: int) -> float:
    """Share of ``||cov||_F^2`` captured by its nearest ``B (p2 x p2) kron A (p1 x p1)``.

    Uses the Van Loan-Pitsianis rearrangement: the best Kronecker
    approximation corresponds to the leading singular pair of the rearranged
    matrix, so the captured share is ``s_1^2 / sum(s^2)``.
    """
    cov = np.asarray(cov, dtype=np.float64)
    n = p1 * p2
    if cov.shape != (n, n):
        raise DimensionError(f"covariance must be {n} x {n}, got {cov.shape}")
    blocks = cov.reshape(p2, p1, p2, p1).transpose(0, 2, 1, 3)  # [j, j', i, i']
    rearranged = blocks.reshape(p2 * p2, p1 * p1)
    s = np.linalg.svd(rearranged, compute_uv=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise DegenerateInputError("covariance is identically zero")
    return float(s[0] ** 2 / total)


@dataclass
class EvalReport:
    """Named metric values for one method at one factor-number pair."""

    method: str
    k1: int
    k2: int
    metrics: dict[str, float] = field(default_factory=dict)
    per_observation_psnr: np.ndarray | None = None

    def rows(self) -> list[tuple[str, str, float]]:
        return [(self.method, name, value) for name, value in self.metrics.items()]


def evaluate(
    method: str,
    estimated_signal,
    observations,
    truth_signal=None,
    loadings=None,
    truth_loadings=None,
    k1: int = 0,
    k2: int = 0,
    correlation_modes=(),
) -> EvalReport:
    """Collect the standard measurements for one reconstruction."""
    report = EvalReport(method=method, k1=k1, k2=k2)
    m = report.metrics
    if loadings is not None and truth_loadings is not None:
        m["dist_R"] = space_distance(loadings[0], truth_loadings[0])
        m["dist_C"] = space_distance(loadings[1], truth_loadings[1])
    if truth_signal is not None:
        m["rmse_signal"] = rmse_signal(estimated_signal, truth_signal)
    m["rmse_x"] = rmse_signal(estimated_signal, observations)
    per_obs = psnr_series(observations, estimated_signal)
    report.per_observation_psnr = per_obs
    m["psnr_mean"] = float(np.mean(per_obs))
    for mode in correlation_modes:
        m[f"corr_{mode}"] = correlation_distance(observations, estimated_signal, mode)
    return report
