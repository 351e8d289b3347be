"""Train/evaluate pipelines shared by the CLI and the experiment scripts.

Method names:

    ml       predictor on raw (standardized) A and B
    ftu      predictor on A only
    ob1      predictor on (A~, B), scored by averaging over the empirical B
    ob1_sub  same predictor, scored with each row's own (possibly counterfactual) B
    ob2      predictor on A~ only
    sob1, sob1_sub, sob2   as above with the sparse factorization
    none     alias of ftu (A~ = A)
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from . import datagen
from .datagen import ContYParams, Dataset, LoanParams
from .errors import OrthoFairError
from .matrix import DataMatrix, StandardizationParams, standardize
from .metrics import (
    MetricsReport,
    aa_gap,
    acc_auc,
    avg_pairwise_corr,
    cf_metric,
    eo_gap,
    kl_observed_vs_counterfactual,
    modification_norm,
    rmse,
)
from .ob import ObConfig, apply_transform, fit_ob
from .predictors import AveragedScorer, EmpiricalBDistribution, Predictor, fit_linear, fit_logistic, predict_score
from .sob import SobConfig, fit_sob

log = logging.getLogger(__name__)

METHODS = ("ml", "ftu", "ob1", "ob1_sub", "ob2", "sob1", "sob1_sub", "sob2")
ORTHO_ABORT = 1e-6


class OrthogonalityViolation(OrthoFairError):
    pass


class SensitiveEncoder:
    """One-hot encodes the categorical sensitive columns (first level dropped);
    other columns pass through. Levels are frozen at fit time."""

    def __init__(self, categorical=()):
        self.categorical = tuple(categorical)
        self.levels: dict[str, np.ndarray] = {}
        self.in_names: tuple[str, ...] = ()

    def fit(self, B: DataMatrix) -> SensitiveEncoder:
        self.in_names = B.col_names
        for c in self.categorical:
            self.levels[c] = np.unique(B.select([c]).values[:, 0])
        return self

    @property
    def out_names(self):
        names = []
        for c in self.in_names:
            if c in self.levels:
                names += [f"{c}={lvl:g}" for lvl in self.levels[c][1:]]
            else:
                names.append(c)
        return tuple(names)

    def transform(self, B: DataMatrix) -> DataMatrix:
        cols = []
        for c in self.in_names:
            v = B.select([c]).values[:, 0]
            if c in self.levels:
                cols += [(v == lvl).astype(float) for lvl in self.levels[c][1:]]
            else:
                cols.append(v)
        return DataMatrix(np.column_stack(cols), self.out_names)


def orthogonality_residual(A_tilde, B) -> float:
    """max |A~^T B| / n: largest absolute empirical covariance after centering."""
    At = A_tilde.values if isinstance(A_tilde, DataMatrix) else np.asarray(A_tilde)
    Bv = B.values if isinstance(B, DataMatrix) else np.asarray(B)
    return float(np.max(np.abs(At.T @ Bv)) / At.shape[0])


@dataclass
class Prepared:
    A: DataMatrix
    B: DataMatrix


@dataclass
class Preprocessor:
    """Standardization + sensitive encoding + (optional) fitted factorization."""

    a_params: StandardizationParams
    b_params: StandardizationParams
    encoder: SensitiveEncoder
    factor: object = None
    transform: str = "none"

    @classmethod
    def fit(cls, train: Dataset, transform="none", k=None, h=None, eta=1e-6, max_iters=500,
            seed=0, basis="residual") -> Preprocessor:
        enc = SensitiveEncoder(train.categorical).fit(train.B)
        A_std, a_params = standardize(train.A)
        B_std, b_params = standardize(enc.transform(train.B))
        factor = None
        if transform == "ob":
            factor = fit_ob(A_std, B_std, ObConfig(k=k, basis=basis))
        elif transform == "sob":
            if h is None:
                raise ValueError("sob requires h")
            factor = fit_sob(A_std, B_std, SobConfig(k=k or A_std.m, h=h, eta=eta,
                                                     max_iters=max_iters, seed=seed))
        elif transform != "none":
            raise ValueError(f"unknown transform {transform!r}")
        return cls(a_params, b_params, enc, factor, transform)

    def prepare(self, ds: Dataset) -> Prepared:
        A_std = self.a_params.apply(ds.A)
        B_std = self.b_params.apply(self.encoder.transform(ds.B))
        if self.factor is not None:
            A_std = apply_transform(A_std, B_std, self.factor)
        return Prepared(A_std, B_std)


@dataclass
class FittedMethod:
    method: str
    pre: Preprocessor
    predictor: Predictor
    averaged: AveragedScorer | None = None

    def score(self, ds: Dataset) -> np.ndarray:
        prep = self.pre.prepare(ds)
        if self.averaged is not None:
            return self.averaged(prep.A)
        if self.predictor.uses_sensitive:
            return predict_score(self.predictor, prep.A.hstack(prep.B))
        return predict_score(self.predictor, prep.A)

    __call__ = score


def fit_method(method: str, train: Dataset, kind="logistic", k=None, h=None, eta=1e-6,
               max_iters=500, seed=0, basis="residual", pre: Preprocessor | None = None) -> FittedMethod:
    if method == "none":
        method = "ftu"
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    transform = "ob" if method.startswith("ob") else "sob" if method.startswith("sob") else "none"
    if pre is None or pre.transform != transform:
        pre = Preprocessor.fit(train, transform, k=k, h=h, eta=eta, max_iters=max_iters,
                               seed=seed, basis=basis)
    prep = pre.prepare(train)
    if transform != "none":
        resid = orthogonality_residual(prep.A, prep.B)
        log.info("%s: orthogonality residual %.3g", method, resid)
        if resid > ORTHO_ABORT:
            raise OrthogonalityViolation(
                f"{method}: orthogonality residual {resid:.3g} exceeds {ORTHO_ABORT:g}; "
                "refusing to report fairness metrics")

    use_b = method in ("ml", "ob1", "ob1_sub", "sob1", "sob1_sub")
    X = prep.A.hstack(prep.B) if use_b else prep.A
    sens = prep.B.col_names if use_b else ()
    fitter = fit_logistic if kind == "logistic" else fit_linear
    predictor = fitter(X, train.Y, sensitive_names=sens)
    averaged = None
    if method in ("ob1", "sob1"):
        averaged = AveragedScorer(predictor, EmpiricalBDistribution.from_matrix(prep.B))
    return FittedMethod(method, pre, predictor, averaged)


def split(ds: Dataset, fraction=0.75, seed=0):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    n_train = int(round(fraction * ds.n))
    return ds.take_rows(np.sort(perm[:n_train])), ds.take_rows(np.sort(perm[n_train:]))


def group_labels(ds: Dataset) -> np.ndarray:
    """One label per distinct row of the raw sensitive matrix."""
    _, inv = np.unique(ds.B.values, axis=0, return_inverse=True)
    return inv.ravel()


def substitute_worlds(ds: Dataset):
    """Counterfactual worlds without a causal model: B replaced, A held fixed."""
    support = np.unique(ds.B.values, axis=0)
    worlds = {}
    for idx, row in enumerate(support):
        worlds[idx] = replace(ds, B=ds.B.with_values(np.tile(row, (ds.n, 1))))
    return worlds


def loan_worlds(ds: Dataset):
    return {g: datagen.counterfactual_loan(ds, g) for g in (0, 1, 2)}


# ---------------------------------------------------------------- loan runs

LOAN_METHODS = ("ml", "ftu", "ob1", "ob1_sub", "ob2")


def evaluate_binary(fitted: dict, test: Dataset, worlds=None, mode="scm") -> dict:
    """ACC/AUC/EO on the observed test split, CF-metric and AA gap over the
    counterfactual worlds (``mode`` labels how the worlds were produced)."""
    if worlds is None:
        worlds, mode = substitute_worlds(test), "substitution"
    if mode == "substitution":
        groups = group_labels(test)
    else:
        groups = test.B.values[:, 0]
    out = {}
    for name, fm in fitted.items():
        scores = fm.score(test)
        rep = MetricsReport()
        acc, auc_ = acc_auc(scores, test.Y)
        rep.add("acc", acc, "threshold 0.5")
        if auc_ is not None:
            rep.add("auc", auc_, "Mann-Whitney, ties half")
        rep.add("eo_gap", eo_gap(scores, test.Y, groups),
                "standard equalized-odds gap (approximation of the cited EO fairness)")
        rep.add("cf_metric", cf_metric(fm, test, worlds, groups), f"counterfactuals: {mode}")
        rep.add("aa_gap", aa_gap(fm, worlds),
                f"counterfactual mean-score gap (approximation of the cited AA fairness); counterfactuals: {mode}")
        out[name] = rep
    return out


def run_loan(params: LoanParams | None = None, methods=LOAN_METHODS, split_fraction=0.75,
             k=None, h=None, basis="residual") -> dict:
    params = params or LoanParams()
    ds = datagen.gen_loan(params)
    train, test = split(ds, split_fraction, params.seed)
    fitted = {}
    pres = {}
    for m in methods:
        transform = "ob" if m.startswith("ob") else "sob" if m.startswith("sob") else "none"
        fm = fit_method(m, train, "logistic", k=k, h=h, seed=params.seed, basis=basis,
                        pre=pres.get(transform))
        pres[transform] = fm.pre
        fitted[m] = fm
    return evaluate_binary(fitted, test, loan_worlds(test), "scm")


def beta_sweep(grid, base: LoanParams | None = None, methods=LOAN_METHODS, seeds: int = 10,
               metrics=("acc", "auc", "cf_metric", "eo_gap", "aa_gap")) -> list[dict]:
    """Rows of (beta_E, method, metric, mean, std) over `seeds` repetitions."""
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    base = base or LoanParams()
    methods = tuple(methods or LOAN_METHODS)
    rows = []
    for beta_e in grid:
        runs = [run_loan(replace(base, beta_E=float(beta_e), seed=base.seed + s), methods)
                for s in range(seeds)]
        for m in methods:
            for metric in metrics:
                vals = np.array([r[m].values[metric] for r in runs if metric in r[m].values])
                if vals.size == 0:
                    continue
                rows.append({"beta_E": float(beta_e), "method": m, "metric": metric,
                             "mean": float(vals.mean()),
                             "std": float(vals.std(ddof=1)) if vals.size > 1 else 0.0})
    return rows


def rows_to_tsv(rows, columns=("beta_E", "method", "metric", "mean", "std")) -> str:
    lines = ["\t".join(columns)]
    for r in rows:
        lines.append("\t".join(f"{r[c]:.10g}" if isinstance(r[c], float) else str(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------- continuous-Y runs

CONT_Y_METHODS = ("ml", "ftu", "ob1", "ob1_sub", "ob2")


def evaluate_continuous(fitted: dict, test: Dataset, cf: Dataset) -> dict:
    out = {}
    for name, fm in fitted.items():
        s_obs, s_cf = fm.score(test), fm.score(cf)
        rep = MetricsReport()
        rep.add("rmse", rmse(s_obs, test.Y))
        rep.add("kl", kl_observed_vs_counterfactual(s_obs, s_cf),
                "histogram KL(observed || counterfactual), 50 bins, smoothing 1e-9")
        out[name] = rep
    return out


def run_cont_y(params: ContYParams | None = None, methods=CONT_Y_METHODS, k=None, h=None) -> dict:
    params = params or ContYParams()
    train, test, cf, _ = datagen.gen_cont_y(params)
    fitted, pres = {}, {}
    for m in methods:
        transform = "ob" if m.startswith("ob") else "sob" if m.startswith("sob") else "none"
        fm = fit_method(m, train, "linear", k=k, h=h, seed=params.seed, pre=pres.get(transform))
        pres[transform] = fm.pre
        fitted[m] = fm
    reports = evaluate_continuous(fitted, test, cf)

    a_cols = [c for c in train.A.col_names if c.startswith("A")]
    raw_corr = avg_pairwise_corr(train.A.select(a_cols), train.B)
    for m, fm in fitted.items():
        prep = fm.pre.prepare(train)
        A_std = fm.pre.a_params.apply(train.A)
        idx = [train.A.col_names.index(c) for c in a_cols]
        processed = DataMatrix(prep.A.values[:, idx], tuple(a_cols))
        reports[m].add("corr_raw", raw_corr, "mean |corr| of B-dependent A columns with B, train split")
        reports[m].add("corr_processed", avg_pairwise_corr(processed, train.B),
                       "same, on the (possibly transformed) training features")
        reports[m].add("modification_norm", modification_norm(A_std, prep.A),
                       "||A~ - A||_F on standardized training features")
    return reports


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
