"""Downstream predictors: logistic (IRLS) and linear regression, plus the
averaged predictor that marginalizes a sensitive-aware model over the
empirical distribution of the sensitive columns."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import expit, log_expit

from .errors import FeatureMismatch, SeparationDetected
from .matrix import DataMatrix, as_array, least_squares

_DIVERGED = 1e6


@dataclass(frozen=True)
class Predictor:
    weights: np.ndarray
    intercept: float
    kind: Literal["logistic", "linear"]
    feature_names: tuple[str, ...]
    uses_sensitive: bool = False
    sensitive_names: tuple[str, ...] = ()
    converged: bool = True
    separated: bool = False
    loss_trace: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.feature_names),):
            raise FeatureMismatch(f"{w.size} weights for {len(self.feature_names)} features")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "sensitive_names", tuple(self.sensitive_names))

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "uses_sensitive": self.uses_sensitive,
            "sensitive_names": list(self.sensitive_names),
        })

    @classmethod
    def from_json(cls, text: str) -> Predictor:
        d = json.loads(text)
        return cls(
            weights=np.array(d["weights"], dtype=float),
            intercept=float(d["intercept"]),
            kind=d["kind"],
            feature_names=tuple(d["feature_names"]),
            uses_sensitive=bool(d.get("uses_sensitive", False)),
            sensitive_names=tuple(d.get("sensitive_names", ())),
        )


def _design(X):
    Xa = as_array(X)
    names = X.col_names if isinstance(X, DataMatrix) else tuple(f"x{j + 1}" for j in range(Xa.shape[1]))
    return Xa, names


def _nll(Xb, y, beta, ridge):
    eta = Xb @ beta
    # -[y log p + (1-y) log(1-p)] written stably
    loss = -np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta))
    return loss + 0.5 * ridge * np.sum(beta[1:] ** 2)


def fit_logistic(X, y, tol: float = 1e-8, max_iters: int = 100, ridge: float = 0.0,
                 sensitive_names: Sequence[str] = ()) -> Predictor:
    """Maximum-likelihood logistic regression by damped IRLS (Newton steps
    with step halving, so the training loss never increases)."""
    Xa, names = _design(X)
    y = np.asarray(y, dtype=float).ravel()
    if Xa.shape[0] != y.size:
        raise FeatureMismatch(f"{Xa.shape[0]} rows vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    n, m = Xa.shape
    Xb = np.hstack([np.ones((n, 1)), Xa])
    beta = np.zeros(m + 1)
    penalty = ridge * np.diag(np.r_[0.0, np.ones(m)])
    loss = _nll(Xb, y, beta, ridge)
    trace = [loss]
    converged = False
    for _ in range(max_iters):
        p = expit(Xb @ beta)
        grad = Xb.T @ (p - y) + penalty @ beta
        if np.linalg.norm(grad) <= tol:
            converged = True
            break
        w = p * (1 - p)
        H = (Xb * w[:, None]).T @ Xb + penalty
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(m + 1), grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta - t * step
            new_loss = _nll(Xb, y, cand, ridge)
            if new_loss <= loss or t < 1e-10:
                break
            t *= 0.5
        if new_loss > loss:
            # no descent left at machine precision
            converged = np.linalg.norm(grad) <= max(tol, 1e-6)
            break
        beta, loss = cand, new_loss
        trace.append(loss)
        if np.linalg.norm(beta) > _DIVERGED:
            break

    margins = (2 * y - 1) * (Xb @ beta)
    separated = ridge == 0 and (bool(np.all(margins > 0)) or np.linalg.norm(beta) > _DIVERGED)
    if separated:
        warnings.warn("labels are perfectly separable; coefficients diverge", SeparationDetected,
                      stacklevel=2)
    sens = tuple(sensitive_names)
    return Predictor(
        weights=beta[1:], intercept=float(beta[0]), kind="logistic", feature_names=names,
        uses_sensitive=bool(sens), sensitive_names=sens, converged=converged and not separated,
        separated=separated, loss_trace=tuple(trace),
    )


def fit_linear(X, y, sensitive_names: Sequence[str] = ()) -> Predictor:
    """Ordinary least squares with an intercept."""
    Xa, names = _design(X)
    y = np.asarray(y, dtype=float).ravel()
    if Xa.shape[0] != y.size:
        raise FeatureMismatch(f"{Xa.shape[0]} rows vs {y.size} targets")
    Xb = np.hstack([np.ones((Xa.shape[0], 1)), Xa])
    beta = least_squares(Xb, y)
    sens = tuple(sensitive_names)
    return Predictor(weights=beta[1:], intercept=float(beta[0]), kind="linear",
                     feature_names=names, uses_sensitive=bool(sens), sensitive_names=sens)


def _aligned(p: Predictor, X) -> np.ndarray:
    if isinstance(X, DataMatrix):
        if X.col_names != p.feature_names:
            try:
                X = X.select(p.feature_names)
            except ValueError as exc:
                raise FeatureMismatch(f"expected features {p.feature_names}, got {X.col_names}") from exc
        return X.values
    Xa = as_array(X)
    if Xa.shape[1] != len(p.feature_names):
        raise FeatureMismatch(f"expected {len(p.feature_names)} columns, got {Xa.shape[1]}")
    return Xa


def predict_score(p: Predictor, X) -> np.ndarray:
    eta = _aligned(p, X) @ p.weights + p.intercept
    return expit(eta) if p.kind == "logistic" else eta


@dataclass(frozen=True)
class EmpiricalBDistribution:
    support: np.ndarray        # distinct rows of B
    probabilities: np.ndarray
    col_names: tuple[str, ...] = ()

    @classmethod
    def from_matrix(cls, B) -> EmpiricalBDistribution:
        Ba = as_array(B)
        support, counts = np.unique(Ba, axis=0, return_counts=True)
        names = B.col_names if isinstance(B, DataMatrix) else ()
        return cls(support, counts / counts.sum(), names)

    def __post_init__(self):
        pr = np.asarray(self.probabilities, dtype=float)
        if pr.ndim != 1 or pr.size == 0 or np.any(pr < 0) or abs(pr.sum() - 1) > 1e-12:
            raise ValueError("probabilities must be a nonnegative vector summing to 1")
        sup = np.atleast_2d(np.asarray(self.support, dtype=float))
        if sup.shape[0] != pr.size:
            raise ValueError("support and probabilities differ in length")
        if np.unique(sup, axis=0).shape[0] != sup.shape[0]:
            raise ValueError("support rows must be distinct")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probabilities", pr)


class AveragedScorer:
    """a -> sum_b f(a, b) P(b) for a predictor f over [non-sensitive, sensitive]
    features.

    For logistic models this is a mixture of probabilities, not the expit of
    the averaged logit.
    """

    def __init__(self, predictor: Predictor, dist: EmpiricalBDistribution):
        if not predictor.uses_sensitive:
            raise ValueError("predictor does not use sensitive columns")
        sens = predictor.sensitive_names
        self.predictor = predictor
        self.dist = dist
        self.sens_idx = np.array([predictor.feature_names.index(c) for c in sens])
        self.feature_names = tuple(c for c in predictor.feature_names if c not in sens)
        self.nonsens_idx = np.array([predictor.feature_names.index(c) for c in self.feature_names],
                                    dtype=int)
        if dist.support.shape[1] != len(sens):
            raise FeatureMismatch("distribution dimension does not match sensitive features")

    def __call__(self, X) -> np.ndarray:
        if isinstance(X, DataMatrix):
            Xa = X.select(self.feature_names).values
        else:
            Xa = as_array(X)
        p = self.predictor
        base = Xa @ p.weights[self.nonsens_idx] + p.intercept
        offsets = self.dist.support @ p.weights[self.sens_idx]
        if p.kind == "linear":
            return base + self.dist.probabilities @ offsets
        return expit(base[:, None] + offsets[None, :]) @ self.dist.probabilities


def average_over_b(p: Predictor, dist: EmpiricalBDistribution) -> AveragedScorer:
    return AveragedScorer(p, dist)
