"""Bilinear matrix factor model reconstruction on shared sPCA loadings.

The bilinear model keeps only the global factor, so its signal is the
two-sided projection ``P_R X P_C``.  Reusing the sPCA loadings makes the
comparison with the three-term signal a pure statement about model form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LoadingPair, MatrixSeries
from .estimator import _as_series, _check_match

__all__ = ["BilinearFit", "bilinear_scores", "bilinear_signal", "fit_bilinear"]


def bilinear_scores(series, loadings: LoadingPair) -> np.ndarray:
    """``R' X_t C / (p1 p2)`` for every t, shape ``(T, k1, k2)``."""
    series = _as_series(series)
    _check_match(series, loadings)
    p1, p2 = series.rows, series.cols
    return loadings.R.T @ series.data @ loadings.C / (p1 * p2)


def bilinear_signal(series, loadings: LoadingPair) -> MatrixSeries:
    series = _as_series(series)
    _check_match(series, loadings)
    return MatrixSeries(loadings.row_projector @ series.data @ loadings.col_projector)


@dataclass(frozen=True, eq=False)
class BilinearFit:
    loadings: LoadingPair
    Z_tilde: np.ndarray
    signal: MatrixSeries


def fit_bilinear(series, loadings: LoadingPair) -> BilinearFit:
    series = _as_series(series)
    Z = bilinear_scores(series, loadings)
    Z.setflags(write=False)
    return BilinearFit(loadings=loadings, Z_tilde=Z, signal=bilinear_signal(series, loadings))
