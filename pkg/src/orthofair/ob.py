"""Closed-form orthogonal-to-bias transform.

Finds a rank-k factorization S U^T of a standardized non-sensitive matrix A
whose columns are exactly orthogonal to the sensitive matrix B, changing A as
little as possible in Frobenius norm.

With U fixed, the optimal scores are ``S = A U - B Lambda`` where each column
of ``Lambda`` is the least-squares coefficient of ``A u_j`` on B, i.e.
``S = (I - P_B) A U``. The remaining problem over U is a plain rank-k
approximation of the residualized matrix ``(I - P_B) A``, so the minimizing
basis is its top-k right singular vectors (``basis="residual"``, default).
``basis="data"`` instead takes the right singular vectors of A itself; the two
coincide when B is orthogonal to A or when k = q, and otherwise the data basis
is feasible but not minimal.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NotStandardized, ShapeMismatch, SingularSensitiveGram, UnivariateOnly
from .matrix import DataMatrix, as_array, check_conditioning, least_squares, truncated_svd


@dataclass(frozen=True)
class ObConfig:
    k: int | None = None  # None means full rank (k = q)
    center_check_tol: float = 1e-8
    basis: Literal["residual", "data"] = "residual"


@dataclass(frozen=True)
class FactorPair:
    S: np.ndarray             # n x k scores
    U: np.ndarray             # q x k orthonormal basis
    multipliers: np.ndarray   # k x p, row j = least-squares coefficients of A u_j on B
    recon_error: float        # ||A - S U^T||_F
    svd_error: float          # same for the unconstrained rank-k SVD
    score_map: np.ndarray     # (q + p) x k, S = [A, B] @ score_map
    col_names: tuple[str, ...] = ()

    @property
    def k(self):
        return self.U.shape[1]

    def reconstruct(self) -> np.ndarray:
        return self.S @ self.U.T


def check_centered(M, tol, label="") -> None:
    X = as_array(M)
    names = M.col_names if isinstance(M, DataMatrix) else [f"{label}{j + 1}" for j in range(X.shape[1])]
    means = X.mean(axis=0)
    # scale tolerance by column magnitude so unscaled data is still judged fairly
    scale = np.maximum(1.0, np.abs(X).max(axis=0))
    bad = np.flatnonzero(np.abs(means) > tol * scale)
    if bad.size:
        j = int(bad[0])
        raise NotStandardized(names[j], float(means[j]))


def svd_tail_error(X, k):
    sv = np.linalg.svd(X, compute_uv=False)
    return float(np.sqrt(np.sum(sv[k:] ** 2)))


def fit_ob(A, B, cfg: ObConfig | None = None) -> FactorPair:
    """Fit the closed-form orthogonal-to-bias factorization of A against B."""
    cfg = cfg or ObConfig()
    Aa, Ba = as_array(A), as_array(B)
    n, q = Aa.shape
    if Ba.shape[0] != n:
        raise ShapeMismatch(f"A has {n} rows but B has {Ba.shape[0]}")
    k = q if cfg.k is None else int(cfg.k)
    if not 1 <= k <= min(n, q):
        raise ValueError(f"k={k} outside [1, {min(n, q)}]")
    check_centered(A, cfg.center_check_tol, "a")
    check_centered(B, cfg.center_check_tol, "b")
    check_conditioning(Ba, SingularSensitiveGram, "sensitive")

    coef = least_squares(Ba, Aa, SingularSensitiveGram)   # p x q
    residual = Aa - Ba @ coef
    source = residual if cfg.basis == "residual" else Aa
    U = truncated_svd(source, k).V_right

    AU = Aa @ U
    lam = least_squares(Ba, AU, SingularSensitiveGram)    # p x k
    S = AU - Ba @ lam

    names = A.col_names if isinstance(A, DataMatrix) else ()
    return FactorPair(
        S=S,
        U=U,
        multipliers=lam.T,
        recon_error=float(np.linalg.norm(Aa - S @ U.T)),
        svd_error=svd_tail_error(Aa, k),
        score_map=np.vstack([U, -lam]),
        col_names=tuple(names),
    )


def transform(A, fp) -> DataMatrix:
    """Processed matrix S U^T for the rows the factorization was fitted on."""
    Aa = as_array(A)
    S, U = fp.S, fp.U
    if Aa.shape != (S.shape[0], U.shape[0]):
        raise ShapeMismatch(f"A is {Aa.shape}, factorization expects {(S.shape[0], U.shape[0])}")
    names = A.col_names if isinstance(A, DataMatrix) else (fp.col_names or None)
    return DataMatrix.from_array(S @ U.T, prefix="a", col_names=names)


def apply_transform(A, B, fp) -> DataMatrix:
    """Map new (standardized) rows through a fitted factorization.

    Scores are the fitted linear map of [a, b]; for the closed form this is
    exactly ``a U - b Lambda``.
    """
    Aa, Ba = as_array(A), as_array(B)
    q, k = fp.U.shape
    if Aa.shape[1] != q or Aa.shape[1] + Ba.shape[1] != fp.score_map.shape[0]:
        raise ShapeMismatch("column counts do not match the fitted factorization")
    if Aa.shape[0] != Ba.shape[0]:
        raise ShapeMismatch("A and B row counts differ")
    S = np.hstack([Aa, Ba]) @ fp.score_map
    names = A.col_names if isinstance(A, DataMatrix) else (fp.col_names or None)
    return DataMatrix.from_array(S @ fp.U.T, prefix="a", col_names=names)


def lemma_gap_diagnostic(A, b, k: int, center_check_tol: float = 1e-8) -> tuple[float, float]:
    """Return ``(lemma_value, direct_gap)`` for a single sensitive vector b.

    ``lemma_value`` is the closed-form expression ||k P V_k D_k||_F with
    P_ij = 1/n + b_i b_j / sum(b^2) and V_k D_k the scaled top-k left singular
    vectors of A. ``direct_gap`` is the measured excess reconstruction error of
    the orthogonal fit over the rank-k SVD. No relation between them is
    assumed.
    """
    Ba = as_array(b)
    if Ba.shape[1] != 1:
        raise UnivariateOnly(f"b must be a single column, got {Ba.shape[1]}")
    Aa = as_array(A)
    check_centered(A, center_check_tol, "a")
    check_centered(Ba, center_check_tol, "b")
    n = Aa.shape[0]
    bv = Ba[:, 0]
    P = 1.0 / n + np.outer(bv, bv) / np.dot(bv, bv)
    svd = truncated_svd(Aa, k)
    lemma_value = float(np.linalg.norm(k * P @ (svd.U_left * svd.D)))
    fp = fit_ob(Aa, Ba, ObConfig(k=k, center_check_tol=center_check_tol))
    return lemma_value, fp.recon_error - fp.svd_error
