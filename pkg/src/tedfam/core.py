"""Domain types, dense linear-algebra helpers and the seeded random source.

Every array held by the types below is a read-only float64 copy, so instances
can be shared freely between threads.  Matrix series are stored as a single
``(T, p1, p2)`` array.  Dimensions up to ``p = 1024`` per mode are the
supported working range; nothing stops larger inputs, but the dense
eigensolver cost grows as ``p**3``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TedfamError",
    "ValidationError",
    "DimensionError",
    "DegenerateInputError",
    "NumericalError",
    "MatrixSeries",
    "LoadingPair",
    "FactorScores",
    "MomentPair",
    "RngStream",
    "symmetric_eig_descending",
    "fix_signs",
    "column_signs",
    "symmetric_sqrt",
    "vec",
    "unvec",
]

ASYMMETRY_TOL = 1e-12
ORTHONORMAL_TOL = 1e-10
EIG_RESIDUAL_TOL = 1e-10
PSD_TOL = 1e-10


class TedfamError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(TedfamError, ValueError):
    """Input violates a documented precondition."""


class DimensionError(ValidationError):
    """Shapes or ranks are out of range or mutually inconsistent."""


class DegenerateInputError(ValidationError):
    """Input is well-formed but carries no usable information (e.g. all zeros)."""


class NumericalError(TedfamError, ArithmeticError):
    """A numerical routine failed or produced an out-of-tolerance result."""


def _frozen(a, ndim: int | None = None, name: str = "array") -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MatrixSeries:
    """T observations of p1 x p2 real matrices, stored as a ``(T, p1, p2)`` array."""

    data: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.data, name="MatrixSeries data")
        if arr.ndim == 2:
            arr = _frozen(arr[None, :, :])
        if arr.ndim != 3:
            raise DimensionError(f"MatrixSeries needs a (T, p1, p2) array, got shape {arr.shape}")
        T, p1, p2 = arr.shape
        if T < 1:
            raise ValidationError("MatrixSeries needs at least one observation")
        if p1 < 2 or p2 < 2:
            raise DimensionError(f"MatrixSeries needs p1, p2 >= 2, got ({p1}, {p2})")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValidationError(f"non-finite value at observation {bad[0]}, entry ({bad[1]}, {bad[2]})")
        object.__setattr__(self, "data", arr)

    @property
    def num_obs(self) -> int:
        return self.data.shape[0]

    @property
    def rows(self) -> int:
        return self.data.shape[1]

    @property
    def cols(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __len__(self) -> int:
        return self.num_obs

    def __getitem__(self, t: int) -> np.ndarray:
        return self.data[t]

    def __iter__(self):
        return iter(self.data)

    def centered(self) -> "MatrixSeries":
        """Subtract the per-entry mean over t."""
        return MatrixSeries(self.data - self.data.mean(axis=0, keepdims=True))

    def scaled(self, c: float) -> "MatrixSeries":
        return MatrixSeries(c * self.data)


@dataclass(frozen=True, eq=False)
class LoadingPair:
    """Row loading ``R`` (p1 x k1), column loading ``C`` (p2 x k2) and their eigenvalues.

    Both loadings are scaled so that ``R.T @ R / p1 = I`` and ``C.T @ C / p2 = I``,
    and each column has its largest-magnitude entry positive.
    """

    R: np.ndarray
    C: np.ndarray
    eigvals_row: np.ndarray
    eigvals_col: np.ndarray

    def __post_init__(self):
        R = _frozen(self.R, 2, "R")
        C = _frozen(self.C, 2, "C")
        ev_r = _frozen(self.eigvals_row, 1, "eigvals_row")
        ev_c = _frozen(self.eigvals_col, 1, "eigvals_col")
        for name, L, ev in (("R", R, ev_r), ("C", C, ev_c)):
            p, k = L.shape
            if not 1 <= k < p:
                raise DimensionError(f"{name} must have 1 <= k < p, got shape {L.shape}")
            if ev.shape != (k,):
                raise DimensionError(f"{name} has {k} columns but {ev.shape[0]} eigenvalues")
            gram = L.T @ L / p
            if np.max(np.abs(gram - np.eye(k))) > ORTHONORMAL_TOL:
                raise ValidationError(f"{name}.T @ {name} / p is not the identity")
            if np.any(np.diff(ev) > 0):
                raise ValidationError(f"eigenvalues for {name} are not descending")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "eigvals_row", ev_r)
        object.__setattr__(self, "eigvals_col", ev_c)

    @property
    def k1(self) -> int:
        return self.R.shape[1]

    @property
    def k2(self) -> int:
        return self.C.shape[1]

    @property
    def row_projector(self) -> np.ndarray:
        return self.R @ self.R.T / self.R.shape[0]

    @property
    def col_projector(self) -> np.ndarray:
        return self.C @ self.C.T / self.C.shape[0]


@dataclass(frozen=True, eq=False)
class FactorScores:
    """Per-observation factors: ``Z`` (T, k1, k2), ``E`` (T, p2, k1), ``F`` (T, p1, k2)."""

    Z: np.ndarray
    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        Z = _frozen(self.Z, 3, "Z")
        E = _frozen(self.E, 3, "E")
        F = _frozen(self.F, 3, "F")
        if not Z.shape[0] == E.shape[0] == F.shape[0]:
            raise DimensionError("Z, E and F must have the same number of blocks")
        for name, a in (("Z", Z), ("E", E), ("F", F)):
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} contains non-finite values")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F", F)

    @property
    def num_obs(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True, eq=False)
class MomentPair:
    """Second-order moment matrices ``M1`` (p1 x p1) and ``M2`` (p2 x p2), symmetrized."""

    M1: np.ndarray
    M2: np.ndarray

    def __post_init__(self):
        mats = []
        for name in ("M1", "M2"):
            M = np.asarray(getattr(self, name), dtype=np.float64)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise DimensionError(f"{name} must be square, got shape {M.shape}")
            M = 0.5 * (M + M.T)
            ev = np.linalg.eigvalsh(M)
            if ev[0] < -PSD_TOL * max(ev[-1], 0.0) - 1e-300:
                raise ValidationError(f"{name} is not positive semidefinite (min eigenvalue {ev[0]:.3e})")
            mats.append(_frozen(M))
        object.__setattr__(self, "M1", mats[0])
        object.__setattr__(self, "M2", mats[1])


class RngStream:
    """Seeded normal-variate source backed by PCG64.

    The same seed yields the same draws on every platform numpy supports.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def standard_normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


def column_signs(V: np.ndarray) -> np.ndarray:
    """Sign of the largest-magnitude entry of each column (lowest index on ties, 0 maps to +1)."""
    V = np.asarray(V)
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive.

    Ties go to the lowest row index.  Idempotent.
    """
    V = np.array(V, dtype=np.float64, copy=True)
    if V.size == 0:
        return V
    return V * column_signs(V)


def symmetric_eig_descending(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a symmetric matrix, largest first.

    Returns ``(eigvals, V)`` with ``V`` of shape ``(p, k)``, orthonormal columns
    and signs fixed by :func:`fix_signs`.  For repeated eigenvalues any
    orthonormal basis of the eigenspace may come back.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    p = M.shape[0]
    if not 1 <= k <= p:
        raise DimensionError(f"k must satisfy 1 <= k <= {p}, got {k}")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix contains non-finite values")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > ASYMMETRY_TOL * scale:
        raise ValidationError("matrix is not symmetric")
    M = 0.5 * (M + M.T)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"symmetric eigensolver did not converge within the LAPACK iteration cap (30*p sweeps): {exc}"
        ) from exc
    norm2 = float(np.max(np.abs(w)))
    order = np.argsort(w, kind="stable")[::-1][:k]
    w = w[order]
    V = fix_signs(V[:, order])

    resid = np.linalg.norm(M @ V - V * w, axis=0)
    if np.any(resid > EIG_RESIDUAL_TOL * norm2 + 1e-300):
        raise NumericalError(f"eigenpair residual {resid.max():.3e} exceeds tolerance")
    return w, V


def symmetric_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a positive definite matrix via eigendecomposition."""
    M = np.asarray(M, dtype=np.float64)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    if w[0] <= 0:
        raise NumericalError(f"matrix is not positive definite (min eigenvalue {w[0]:.3e})")
    return (V * np.sqrt(w)) @ V.T


def vec(A: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(A).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape(rows, cols, order="F")
