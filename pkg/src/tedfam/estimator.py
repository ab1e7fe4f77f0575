"""sPCA estimation for the tensor-decomposition matrix factor model.

Pipeline: second-order moment matrices of the observations, loadings from
their leading eigenvectors, closed-form least-squares factor scores and the
three-term signal ``R Z C' + R E' + F C'``.  Factor numbers can be picked with
the eigenvalue-ratio rule when unknown.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    DegenerateInputError,
    DimensionError,
    FactorScores,
    LoadingPair,
    MatrixSeries,
    MomentPair,
    ValidationError,
    symmetric_eig_descending,
)

__all__ = [
    "FitResult",
    "compute_moments",
    "estimate_loadings",
    "estimate_scores",
    "reconstruct_signal",
    "reconstruct_signal_expanded",
    "fit",
    "estimate_rank",
    "spectra",
    "default_k_max",
]

RATIO_FLOOR = 1e-12
RATIO_TIE_RTOL = 1e-12


def _as_series(series) -> MatrixSeries:
    return series if isinstance(series, MatrixSeries) else MatrixSeries(series)


def _check_match(series: MatrixSeries, loadings: LoadingPair) -> None:
    if loadings.R.shape[0] != series.rows or loadings.C.shape[0] != series.cols:
        raise ValidationError(
            f"loadings are {loadings.R.shape[0]} x {loadings.C.shape[0]} "
            f"but observations are {series.rows} x {series.cols}"
        )


def compute_moments(series: MatrixSeries) -> MomentPair:
    """Row and column second moments scaled by ``1 / (T p1 p2)``.

    Accumulates over t in ascending order so the result does not depend on
    how the work is split.
    """
    series = _as_series(series)
    T, p1, p2 = series.shape
    M1 = np.zeros((p1, p1))
    M2 = np.zeros((p2, p2))
    for X in series.data:
        M1 += X @ X.T
        M2 += X.T @ X
    scale = 1.0 / (T * p1 * p2)
    return MomentPair(M1 * scale, M2 * scale)


def estimate_loadings(moments: MomentPair, k1: int, k2: int) -> LoadingPair:
    """``R = sqrt(p1) * eig(M1, k1)`` and ``C = sqrt(p2) * eig(M2, k2)``."""
    p1 = moments.M1.shape[0]
    p2 = moments.M2.shape[0]
    if not 1 <= k1 < p1:
        raise DimensionError(f"k1 must satisfy 1 <= k1 < p1 = {p1}, got {k1}")
    if not 1 <= k2 < p2:
        raise DimensionError(f"k2 must satisfy 1 <= k2 < p2 = {p2}, got {k2}")
    w1, V1 = symmetric_eig_descending(moments.M1, k1)
    w2, V2 = symmetric_eig_descending(moments.M2, k2)
    return LoadingPair(
        R=np.sqrt(p1) * V1,
        C=np.sqrt(p2) * V2,
        eigvals_row=np.clip(w1, 0.0, None),
        eigvals_col=np.clip(w2, 0.0, None),
    )


def estimate_scores(series: MatrixSeries, loadings: LoadingPair) -> FactorScores:
    """Least-squares factor scores given loadings.

    ``F_t = X_t C / p2``, ``E_t = X_t' R / p1`` and ``Z_t = -R' X_t C / (p1 p2)``.
    """
    series = _as_series(series)
    _check_match(series, loadings)
    X = series.data
    R, C = loadings.R, loadings.C
    p1, p2 = series.rows, series.cols
    F = X @ C / p2
    E = np.swapaxes(X, 1, 2) @ R / p1
    Z = -(R.T @ X @ C) / (p1 * p2)
    return FactorScores(Z=Z, E=E, F=F)


def reconstruct_signal(series: MatrixSeries, loadings: LoadingPair) -> MatrixSeries:
    """Signal estimate ``P_R X + X P_C - P_R X P_C`` for each observation."""
    series = _as_series(series)
    _check_match(series, loadings)
    X = series.data
    PR = loadings.row_projector
    PC = loadings.col_projector
    RX = PR @ X
    return MatrixSeries(RX + X @ PC - RX @ PC)


def reconstruct_signal_expanded(series: MatrixSeries, loadings: LoadingPair) -> MatrixSeries:
    """Same signal written term by term from the loadings, for cross-checks."""
    series = _as_series(series)
    _check_match(series, loadings)
    X = series.data
    R, C = loadings.R, loadings.C
    p1, p2 = series.rows, series.cols
    RRt = R @ R.T
    CCt = C @ C.T
    S = -(RRt @ X @ CCt) / (p1 * p2) + (RRt @ X) / p1 + (X @ CCt) / p2
    return MatrixSeries(S)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Everything the sPCA pipeline produces for one series.

    ``signal`` is computed lazily from the (possibly centered) input the first
    time it is accessed.
    """

    series: MatrixSeries
    loadings: LoadingPair
    scores: FactorScores
    k1: int
    k2: int
    all_eigvals_row: np.ndarray
    all_eigvals_col: np.ndarray
    centered: bool = False
    mean: np.ndarray | None = None

    @cached_property
    def signal(self) -> MatrixSeries:
        return reconstruct_signal(self.series, self.loadings)

    @property
    def residual(self) -> MatrixSeries:
        return MatrixSeries(self.series.data - self.signal.data)


def fit(series, k1: int, k2: int, center: bool = False) -> FitResult:
    """Run the full sPCA pipeline with known factor numbers.

    Parameters
    ----------
    series : MatrixSeries or array of shape (T, p1, p2)
    k1, k2 : int
        Row and column factor numbers.
    center : bool
        Subtract the per-entry temporal mean first.  The model assumes
        zero-mean observations; panel data usually needs this.
    """
    series = _as_series(series)
    mean = None
    if center:
        mean = series.data.mean(axis=0)
        series = series.centered()
    moments = compute_moments(series)
    loadings = estimate_loadings(moments, k1, k2)
    scores = estimate_scores(series, loadings)
    return FitResult(
        series=series,
        loadings=loadings,
        scores=scores,
        k1=k1,
        k2=k2,
        all_eigvals_row=_full_spectrum(moments.M1),
        all_eigvals_col=_full_spectrum(moments.M2),
        centered=center,
        mean=mean,
    )


def _full_spectrum(M: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(M)[::-1]
    w = np.clip(w, 0.0, None)
    w.setflags(write=False)
    return w


def spectra(series, center: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Full descending spectra of the row and column moment matrices."""
    series = _as_series(series)
    if center:
        series = series.centered()
    m = compute_moments(series)
    return _full_spectrum(m.M1), _full_spectrum(m.M2)


def default_k_max(p: int) -> int:
    return max(1, min(20, p // 2, p - 1))


def estimate_rank(spectrum, k_max: int | None = None) -> int:
    """Eigenvalue-ratio estimate of the number of factors.

    Returns the 1-based ``j <= k_max`` maximizing ``lambda_j / lambda_{j+1}``.
    Denominators are floored at ``lambda_1 * 1e-12``; ratios equal to the
    maximum up to a relative ``1e-12`` count as ties and the smallest index
    wins.
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    if lam.ndim != 1:
        raise DimensionError("spectrum must be one-dimensional")
    if k_max is None:
        k_max = default_k_max(lam.size)
    if k_max < 1 or k_max >= lam.size:
        raise DimensionError(f"k_max must satisfy 1 <= k_max < {lam.size}, got {k_max}")
    if np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise ValidationError("spectrum must be nonnegative and descending")
    if lam[0] <= 0:
        raise DegenerateInputError("spectrum is identically zero")
    floor = lam[0] * RATIO_FLOOR
    ratios = lam[:k_max] / np.maximum(lam[1 : k_max + 1], floor)
    best = ratios.max()
    return int(np.flatnonzero(ratios >= best * (1 - RATIO_TIE_RTOL))[0]) + 1
