"""Tensor-decomposition based matrix factor models (TeDFaM).

Estimate row and column loadings of a matrix time series from its
second-order moments, recover global, row-wise and column-wise factor
scores in closed form, and reconstruct the signal.  Includes the bilinear
baseline on the same loadings, simulation scenarios and evaluation metrics.
"""

__version__ = "0.1.0"

from .baseline import BilinearFit, bilinear_scores, bilinear_signal, fit_bilinear
from .core import (
    DegenerateInputError,
    DimensionError,
    FactorScores,
    LoadingPair,
    MatrixSeries,
    MomentPair,
    NumericalError,
    RngStream,
    TedfamError,
    ValidationError,
    symmetric_eig_descending,
)
from .estimator import (
    FitResult,
    compute_moments,
    estimate_loadings,
    estimate_rank,
    estimate_scores,
    fit,
    reconstruct_signal,
    spectra,
)
from .simulate import Scenario, ScenarioConfig, SimulatedDataset, generate_scenario

__all__ = [
    "BilinearFit",
    "DegenerateInputError",
    "DimensionError",
    "FactorScores",
    "FitResult",
    "LoadingPair",
    "MatrixSeries",
    "MomentPair",
    "NumericalError",
    "RngStream",
    "Scenario",
    "ScenarioConfig",
    "SimulatedDataset",
    "TedfamError",
    "ValidationError",
    "bilinear_scores",
    "bilinear_signal",
    "compute_moments",
    "estimate_loadings",
    "estimate_rank",
    "estimate_scores",
    "fit",
    "fit_bilinear",
    "generate_scenario",
    "reconstruct_signal",
    "spectra",
    "symmetric_eig_descending",
]
