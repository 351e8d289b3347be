"""Accuracy and fairness metrics.

Counterfactual metrics take a *scorer* (any callable mapping a Dataset to a
score vector) and counterfactual worlds: datasets whose rows align with the
observed one but whose sensitive attributes (and, when an SCM is attached,
their causal descendants) were set to a target value.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import RequiresGroups, ShapeMismatch, SingleClass
from .matrix import as_array, standardize

KL_BINS = 50
KL_ALPHA = 1e-9


@dataclass(frozen=True)
class CounterfactualPair:
    observed: object          # Dataset
    counterfactual: object    # Dataset
    flipped_mask: np.ndarray

    def __post_init__(self):
        if self.observed.n != self.counterfactual.n or len(self.flipped_mask) != self.observed.n:
            raise ShapeMismatch("observed/counterfactual rows do not align")
        if self.observed.A.col_names != self.counterfactual.A.col_names:
            raise ShapeMismatch("observed/counterfactual schemas differ")


@dataclass
class MetricsReport:
    values: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add(self, name, value, note=""):
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"metric {name} is not finite")
        self.values[name] = value
        if note:
            self.provenance[name] = note

    def __getitem__(self, name):
        return self.values[name]

    def to_json(self) -> str:
        return json.dumps({"values": self.values, "provenance": self.provenance},
                          indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(dict(d["values"]), dict(d.get("provenance", {})))


def _check_len(a, b):
    a, b = np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ShapeMismatch(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def accuracy(scores, y, threshold=0.5) -> float:
    s, y = _check_len(scores, y)
    return float(np.mean((s > threshold) == (y == 1)))


def auc(scores, y) -> float:
    """Mann-Whitney AUC; tied scores earn half credit."""
    s, y = _check_len(scores, y)
    pos, neg = y == 1, y == 0
    n1, n0 = int(pos.sum()), int(neg.sum())
    if n1 == 0 or n0 == 0:
        raise SingleClass("AUC needs both classes")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(s.size)
    sorted_s = s[order]
    # average ranks over ties
    starts = np.r_[0, np.flatnonzero(np.diff(sorted_s)) + 1]
    ends = np.r_[starts[1:], s.size]
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = 0.5 * (a + b - 1) + 1
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def acc_auc(scores, y):
    """(ACC at 0.5, AUC or None when only one class is present)."""
    acc = accuracy(scores, y)
    try:
        return acc, auc(scores, y)
    except SingleClass:
        return acc, None


def rmse(pred, y) -> float:
    p, y = _check_len(pred, y)
    return float(np.sqrt(np.mean((p - y) ** 2)))


def _group_labels(groups):
    g = np.asarray(groups)
    if g.ndim == 2:
        if g.shape[1] != 1:
            g = np.array([tuple(r) for r in g], dtype=object)
        else:
            g = g[:, 0]
    return g


def cf_metric(scorer: Callable, observed, worlds: Mapping, groups) -> float:
    """Max over ordered group pairs (g, g') of the mean, over rows originally
    in g, of |score in the world where B = g'  -  observed score|."""
    groups = _group_labels(groups)
    labels = [g for g in worlds]
    if len(labels) < 2:
        raise RequiresGroups("need counterfactual worlds for at least two groups")
    base = np.asarray(scorer(observed), dtype=float)
    cf_scores = {g: np.asarray(scorer(w), dtype=float) for g, w in worlds.items()}
    best = 0.0
    for g, g2 in itertools.permutations(labels, 2):
        rows = groups == g
        if not np.any(rows):
            continue
        best = max(best, float(np.mean(np.abs(cf_scores[g2][rows] - base[rows]))))
    return best


def aa_gap(scorer: Callable, worlds: Mapping) -> float:
    """Max over group pairs of |mean score with every row set to g  -
    mean score with every row set to g'|."""
    if len(worlds) < 2:
        raise RequiresGroups("need counterfactual worlds for at least two groups")
    means = [float(np.mean(scorer(w))) for w in worlds.values()]
    return float(max(abs(a - b) for a, b in itertools.combinations(means, 2)))


def eo_gap(scores, y, groups, threshold=0.5, return_skipped=False):
    """Equalized-odds gap: max over y in {0,1} and group pairs of the
    difference in positive-prediction rates within the stratum Y = y."""
    s, yv = _check_len(scores, y)
    groups = _group_labels(groups)
    labels = list(dict.fromkeys(groups.tolist()))
    if len(labels) < 2:
        raise RequiresGroups("need at least two groups")
    pred = s > threshold
    gap, skipped = 0.0, []
    for cls in (0, 1):
        rates = []
        for g in labels:
            rows = (groups == g) & (yv == cls)
            if not np.any(rows):
                skipped.append((g, cls))
                continue
            rates.append(pred[rows].mean())
        if len(rates) >= 2:
            gap = max(gap, float(max(rates) - min(rates)))
    return (gap, skipped) if return_skipped else gap


def kl_observed_vs_counterfactual(scores_obs, scores_cf, bins: int = KL_BINS,
                                  alpha: float = KL_ALPHA) -> float:
    """KL(P || Q) between histograms of observed (P) and counterfactual (Q)
    scores on shared equal-width bins over the pooled range."""
    p_s = np.asarray(scores_obs, dtype=float).ravel()
    q_s = np.asarray(scores_cf, dtype=float).ravel()
    if p_s.size == 0 or q_s.size == 0:
        raise ValueError("score vectors must be nonempty")
    lo = min(p_s.min(), q_s.min())
    hi = max(p_s.max(), q_s.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    p = np.histogram(p_s, edges)[0] + alpha
    q = np.histogram(q_s, edges)[0] + alpha
    p, q = p / p.sum(), q / q.sum()
    return float(max(0.0, np.sum(p * np.log(p / q))))


def avg_pairwise_corr(X, B) -> float:
    """Mean |Pearson correlation| over all (column of X, column of B) pairs."""
    Xs, _ = standardize(X)
    Bs, _ = standardize(B)
    n = Xs.n
    if Bs.n != n:
        raise ShapeMismatch("row counts differ")
    C = Xs.values.T @ Bs.values / (n - 1)
    return float(np.mean(np.abs(C)))


def modification_norm(A, A_tilde) -> float:
    Aa, At = as_array(A), as_array(A_tilde)
    if Aa.shape != At.shape:
        raise ShapeMismatch(f"{Aa.shape} vs {At.shape}")
    return float(np.linalg.norm(At - Aa))
