"""Dense matrix primitives: labelled matrices, standardization, truncated SVD,
soft-thresholding and conditioned least squares.

Everything here is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConvergenceFailure,
    RankOutOfRange,
    ShapeMismatch,
    SingularDesign,
    ZeroVarianceColumn,
)

EPS_VAR = 1e-12
COND_TOL = 1e-10


@dataclass(frozen=True)
class DataMatrix:
    """A finite n x m real matrix with unique column labels."""

    values: np.ndarray
    col_names: tuple[str, ...]

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeMismatch(f"DataMatrix needs a non-empty 2-d array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("DataMatrix values must be finite")
        names = tuple(str(c) for c in self.col_names)
        if len(names) != v.shape[1]:
            raise ShapeMismatch(f"{len(names)} column names for {v.shape[1]} columns")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in {names}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "col_names", names)

    @classmethod
    def from_array(cls, values, prefix="x", col_names=None):
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if col_names is None:
            col_names = [f"{prefix}{j + 1}" for j in range(v.shape[1])]
        return cls(v, tuple(col_names))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def m(self):
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def select(self, names: Sequence[str]) -> DataMatrix:
        idx = [self.col_names.index(c) for c in names]
        return DataMatrix(self.values[:, idx], tuple(names))

    def take_rows(self, rows) -> DataMatrix:
        return DataMatrix(self.values[rows], self.col_names)

    def hstack(self, other: DataMatrix) -> DataMatrix:
        if other.n != self.n:
            raise ShapeMismatch(f"row counts differ: {self.n} vs {other.n}")
        return DataMatrix(np.hstack([self.values, other.values]), self.col_names + other.col_names)

    def with_values(self, values) -> DataMatrix:
        return DataMatrix(values, self.col_names)


def as_array(M) -> np.ndarray:
    """Plain 2-d float view of a DataMatrix or array-like."""
    if isinstance(M, DataMatrix):
        return M.values
    a = np.asarray(M, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def _names(M, prefix="x"):
    if isinstance(M, DataMatrix):
        return M.col_names
    return tuple(f"{prefix}{j + 1}" for j in range(as_array(M).shape[1]))


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    stdevs: np.ndarray
    col_names: tuple[str, ...] = ()

    def apply(self, M) -> DataMatrix:
        X = as_array(M)
        if X.shape[1] != len(self.means):
            raise ShapeMismatch(f"expected {len(self.means)} columns, got {X.shape[1]}")
        names = self.col_names or _names(M)
        return DataMatrix((X - self.means) / self.stdevs, names)

    def invert(self, M) -> DataMatrix:
        X = as_array(M)
        names = self.col_names or _names(M)
        return DataMatrix(X * self.stdevs + self.means, names)


def standardize(M) -> tuple[DataMatrix, StandardizationParams]:
    """Center each column and scale to unit sample (n-1) standard deviation."""
    X = as_array(M)
    names = _names(M)
    if X.shape[0] < 2:
        raise ZeroVarianceColumn(names[0])
    means = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    for name, s in zip(names, sd):
        if not s > EPS_VAR:
            raise ZeroVarianceColumn(name)
    params = StandardizationParams(means, sd, names)
    return params.apply(X), params


def unstandardize(M, params: StandardizationParams) -> DataMatrix:
    return params.invert(M)


@dataclass(frozen=True)
class SvdResult:
    U_left: np.ndarray
    D: np.ndarray
    V_right: np.ndarray

    @property
    def k(self):
        return len(self.D)

    def reconstruct(self) -> np.ndarray:
        return (self.U_left * self.D) @ self.V_right.T


def _canonicalize(U, D, V, tol):
    # sign: largest-magnitude entry of each right vector is positive
    for j in range(V.shape[1]):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] *= -1
            U[:, j] *= -1
    # ties in D: order tied block lexicographically by right vector
    order = list(range(len(D)))
    start = 0
    while start < len(D):
        stop = start + 1
        while stop < len(D) and abs(D[start] - D[stop]) <= tol:
            stop += 1
        if stop - start > 1:
            block = sorted(order[start:stop], key=lambda j: tuple(V[:, j]))
            order[start:stop] = block
        start = stop
    return U[:, order], D[order], V[:, order]


def truncated_svd(M, k: int) -> SvdResult:
    """Rank-k SVD with deterministic sign and tie conventions.

    Backed by LAPACK's divide-and-conquer SVD through numpy.
    """
    X = as_array(M)
    n, m = X.shape
    if not 1 <= k <= min(n, m):
        raise RankOutOfRange(f"k={k} outside [1, {min(n, m)}]")
    try:
        U, D, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(msg=str(exc)) from exc
    tol = 1e-12 * max(D[0], 1.0) if len(D) else 0.0
    U, D, V = _canonicalize(U.copy(), D.copy(), Vt.T.copy(), tol)
    return SvdResult(U[:, :k], D[:k], V[:, :k])


def soft_threshold(x, theta: float) -> np.ndarray:
    """sign(x) * max(|x| - theta, 0), elementwise."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def check_conditioning(X, exc=SingularDesign, what="design"):
    sv = np.linalg.svd(as_array(X), compute_uv=False)
    if sv.size == 0 or sv[0] == 0 or sv[-1] <= COND_TOL * sv[0]:
        raise exc(f"{what} matrix is rank deficient or ill-conditioned "
                  f"(singular values {sv[-1]:.3g} / {sv[0] if sv.size else 0:.3g})")
    return sv


def least_squares(X, y, exc=SingularDesign) -> np.ndarray:
    """argmin_beta ||y - X beta||_2 for a well-conditioned full-column-rank X.

    `y` may be a vector or a matrix of stacked right-hand sides.
    """
    Xa = as_array(X)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != Xa.shape[0]:
        raise ShapeMismatch(f"X has {Xa.shape[0]} rows, y has {y.shape[0]}")
    if Xa.shape[1] > Xa.shape[0]:
        raise exc(f"more columns ({Xa.shape[1]}) than rows ({Xa.shape[0]})")
    check_conditioning(Xa, exc)
    beta, *_ = np.linalg.lstsq(Xa, y, rcond=None)
    return beta
