"""Sparse orthogonal-to-bias factorization.

Rank-one components are extracted one at a time by alternating updates:

    s <- normalize(P A u - B beta)     beta = LS coefficients of P A u on B
    u <- normalize(S_theta(A^T s))     theta chosen so that ||u||_1 <= h

where P projects out the score vectors already extracted. Each s update is
the exact maximizer of s^T A u over unit vectors orthogonal to B and to the
previous scores, and each u update the exact maximizer over the l1/l2 ball,
so d = s^T A u never decreases within a component.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateComponent, NoConvergence, ShapeMismatch, SingularSensitiveGram
from .matrix import DataMatrix, as_array, check_conditioning, least_squares, soft_threshold
from .ob import check_centered

_BISECT_ITERS = 200


@dataclass(frozen=True)
class SobConfig:
    k: int
    h: float
    eta: float = 1e-6
    max_iters: int = 500
    seed: int = 0
    center_check_tol: float = 1e-8

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.h < 1:
            raise ValueError("h must be >= 1: a unit l2 vector has l1 norm >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")


@dataclass(frozen=True)
class SobResult:
    S_hat: np.ndarray          # n x k, columns d_i s_i
    U_hat: np.ndarray          # q x k
    d: np.ndarray
    iters: np.ndarray
    converged: np.ndarray
    score_map: np.ndarray      # (q + p) x k, S_hat = [A, B] @ score_map on the fitted rows
    objective: list = field(default_factory=list)  # per component: ||A - S_t U_t^T||_F per iteration
    col_names: tuple[str, ...] = ()

    @property
    def S(self):
        return self.S_hat

    @property
    def U(self):
        return self.U_hat

    @property
    def k(self):
        return self.U_hat.shape[1]

    @property
    def scores_unit(self) -> np.ndarray:
        """Unit-norm score vectors s_i (columns)."""
        return self.S_hat / np.where(self.d == 0, 1.0, self.d)

    def reconstruct(self) -> np.ndarray:
        return self.S_hat @ self.U_hat.T


def _l1_of_normalized(v, theta):
    x = soft_threshold(v, theta)
    nrm = np.linalg.norm(x)
    return np.inf if nrm == 0 else np.abs(x).sum() / nrm


def select_theta(v, h: float) -> float:
    """Smallest threshold (to bisection precision) whose normalized
    soft-thresholded vector has l1 norm at most h.

    If more than h^2 entries tie for the largest magnitude no threshold is
    feasible; the largest threshold that keeps the tied entries is returned
    and :func:`sparse_direction` handles that case.
    """
    v = np.asarray(v, dtype=float)
    if not np.linalg.norm(v) > 0:
        raise ValueError("v must be nonzero")
    if h < 1:
        raise ValueError("h must be >= 1")
    if _l1_of_normalized(v, 0.0) <= h:
        return 0.0
    lo, hi = 0.0, float(np.max(np.abs(v)))
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _l1_of_normalized(v, mid) > h:
            lo = mid
        else:
            hi = mid
    # hi is always on the feasible side (or the all-zero limit)
    if np.isinf(_l1_of_normalized(v, hi)):
        return lo
    return hi


def _tied_direction(v, h):
    """A maximizer of u^T v over the l1/l2 ball when the top entries of v tie:
    m = floor(h^2) equal weights c and one weight r <= c, all on tied entries."""
    a = np.abs(v)
    tied = np.flatnonzero(np.isclose(a, a.max(), rtol=1e-12, atol=0))
    m = int(np.floor(h * h + 1e-12))
    c = (h * m + np.sqrt(max(m * (m + 1 - h * h), 0.0))) / (m * (m + 1))
    r = max(h - m * c, 0.0)
    u = np.zeros_like(a)
    u[tied[:m]] = c
    if m < tied.size:
        u[tied[m]] = r
    return np.sign(v) * u / np.linalg.norm(u)


def sparse_direction(v, h: float) -> np.ndarray:
    """Unit vector maximizing u^T v subject to ||u||_1 <= h."""
    x = soft_threshold(v, select_theta(v, h))
    nrm = np.linalg.norm(x)
    if nrm > 0 and np.abs(x).sum() / nrm <= h * (1 + 1e-12):
        return x / nrm
    return _tied_direction(np.asarray(v, dtype=float), h)


def deflate(x, scores) -> np.ndarray:
    """Apply P = I - sum_l s_l s_l^T to x for unit, mutually orthogonal s_l."""
    x = np.asarray(x, dtype=float)
    for s in scores:
        x = x - s * np.dot(s, x)
    return x


def _normalize(x):
    return x / np.linalg.norm(x)


def fit_sob(A, B, cfg: SobConfig) -> SobResult:
    Aa, Ba = as_array(A), as_array(B)
    n, q = Aa.shape
    if Ba.shape[0] != n:
        raise ShapeMismatch(f"A has {n} rows but B has {Ba.shape[0]}")
    if cfg.k > min(n, q):
        raise ValueError(f"k={cfg.k} exceeds min(n, q)={min(n, q)}")
    check_centered(A, cfg.center_check_tol, "a")
    check_centered(B, cfg.center_check_tol, "b")
    check_conditioning(Ba, SingularSensitiveGram, "sensitive")

    rng = np.random.default_rng(cfg.seed)
    scores, bases, ds, iters, conv, traces = [], [], [], [], [], []
    prev_fit = np.zeros_like(Aa)

    for i in range(cfg.k):
        u = _normalize(rng.standard_normal(q))
        s = np.zeros(n)
        trace = []
        done = False
        t = 0
        while t < cfg.max_iters:
            t += 1
            w = deflate(Aa @ u, scores)
            beta = least_squares(Ba, w, SingularSensitiveGram)
            r = w - Ba @ beta
            if np.linalg.norm(r) <= 1e-12:
                raise DegenerateComponent(i + 1)
            s_new = r / np.linalg.norm(r)
            z = Aa.T @ s_new
            u_new = sparse_direction(z, cfg.h)
            du, ds_ = np.linalg.norm(u_new - u), np.linalg.norm(s_new - s)
            u, s = u_new, s_new
            d = float(s @ Aa @ u)
            trace.append(float(np.linalg.norm(Aa - prev_fit - d * np.outer(s, u))))
            if du <= cfg.eta and ds_ <= cfg.eta:
                done = True
                break
        if not done:
            warnings.warn(f"component {i + 1} did not converge in {cfg.max_iters} iterations",
                          NoConvergence, stacklevel=2)
        # final l1 projection against the settled score vector
        z = Aa.T @ s
        u = sparse_direction(z, cfg.h)
        d = float(s @ Aa @ u)
        scores.append(s)
        bases.append(u)
        ds.append(d)
        iters.append(t)
        conv.append(done)
        traces.append(np.array(trace))
        prev_fit = prev_fit + d * np.outer(s, u)

    d = np.array(ds)
    S_hat = np.column_stack(scores) * d
    U_hat = np.column_stack(bases)
    AB = np.hstack([Aa, Ba])
    score_map, *_ = np.linalg.lstsq(AB, S_hat, rcond=None)
    names = A.col_names if isinstance(A, DataMatrix) else ()
    return SobResult(S_hat, U_hat, d, np.array(iters), np.array(conv), score_map, traces, tuple(names))
