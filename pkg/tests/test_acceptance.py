"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line
that is echoed in the pytest summary (and printed when run as a script)."""
import itertools
import os
import socket
import time
import warnings

import numpy as np
import pytest

from conftest import correlated_instance, record
from oracles import brute_force_min_error
from orthofair import experiments as ex
from orthofair.datagen import ContYParams, LoanParams, read_dataset
from orthofair.errors import NoConvergence
from orthofair.matrix import DataMatrix, standardize, truncated_svd
from orthofair.metrics import eo_gap
from orthofair.ob import ObConfig, fit_ob, lemma_gap_diagnostic
from orthofair.sob import SobConfig, fit_sob


def _k_values(q, n):
    return sorted({1, max(1, q // 2), min(q, n)})


def test_criterion_1_orthogonality_guarantee():
    t0 = time.perf_counter()
    combos = [(n, q, p, k)
              for n, q, p in itertools.product((20, 200, 2000), (3, 10, 40), (1, 3))
              for k in _k_values(q, n)]
    worst = 0.0
    for i in range(200):
        n, q, p, k = combos[i % len(combos)]
        A, B = correlated_instance(1000 + i, n, q, p)
        fp = fit_ob(A, B, ObConfig(k=k))
        worst = max(worst, np.max(np.abs(fp.reconstruct().T @ B.values)) / (1e-8 * n))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed <= 30
    record(1, ok, f"200 instances, worst max|A~^T B| / (1e-8 n) = {worst:.2e}, {elapsed:.1f}s (limit 30s)")
    assert ok


def test_criterion_2_minimality_vs_brute_force():
    t0 = time.perf_counter()
    worst_gain, count = -np.inf, 0
    for n, q, k, seed in itertools.product((4, 6, 8), (2, 3, 4), (1, 2), range(3)):
        if k > q:
            continue
        A, B = correlated_instance(seed, n, q, 1)
        ob = fit_ob(A, B, ObConfig(k=k)).recon_error
        oracle = brute_force_min_error(A.values, B.values, k, seed=seed)
        worst_gain = max(worst_gain, ob - oracle)
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_gain <= 1e-6 and elapsed <= 120
    record(2, ok, f"{count} instances, largest oracle improvement over fit_ob = {worst_gain:.2e} "
                  f"(limit 1e-6), {elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_3_svd_equivalence_when_b_orthogonal():
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, q, p = 60, 6, 1 + seed % 3
        B = standardize(rng.standard_normal((n, p)))[0].values
        A = rng.standard_normal((n, q))
        A -= A.mean(axis=0)
        A -= B @ np.linalg.lstsq(B, A, rcond=None)[0]
        A = standardize(A)[0].values
        assert np.max(np.abs(B.T @ A)) < 1e-10
        for k in range(1, q + 1):
            fp = fit_ob(A, B, ObConfig(k=k))
            worst = max(worst, np.linalg.norm(fp.reconstruct() - truncated_svd(A, k).reconstruct()))
    ok = worst <= 1e-8
    record(3, ok, f"max ||A~ - rank-k SVD||_F = {worst:.2e} (limit 1e-8)")
    assert ok


def test_criterion_4_sob_constraints():
    viol = {"l2": 0.0, "l1": 0.0, "sB": 0.0, "ss": 0.0}
    checked = 0
    for seed in range(100):
        q, p, k = 5 + seed % 6, 1 + seed % 2, 1 + seed % 3
        h = 1 + (seed % 5) / 4 * (np.sqrt(q) - 1)
        A, B = correlated_instance(seed, 50, q, p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoConvergence)
            res = fit_sob(A, B, SobConfig(k=k, h=h, seed=seed))
        s = res.scores_unit
        for i in np.flatnonzero(res.converged):
            u = res.U[:, i]
            viol["l2"] = max(viol["l2"], abs(np.linalg.norm(u) - 1))
            viol["l1"] = max(viol["l1"], np.abs(u).sum() - h)
            viol["sB"] = max(viol["sB"], np.max(np.abs(s[:, i] @ B.values)))
            others = [l for l in range(k) if l != i]
            if others:
                viol["ss"] = max(viol["ss"], np.max(np.abs(s[:, i] @ s[:, others])))
            checked += 1
    rel = 0.0
    for seed in range(5):
        A, B = correlated_instance(500 + seed, 50, 5, 1)
        sob = fit_sob(A, B, SobConfig(k=5, h=np.sqrt(5), seed=seed))
        ob = fit_ob(A, B)
        rel = max(rel, abs(np.linalg.norm(A.values - sob.reconstruct()) - ob.recon_error) / ob.recon_error)
    ok = all(v <= 1e-6 for v in viol.values()) and rel <= 0.05 and checked > 0
    record(4, ok, f"{checked} converged components, worst violations "
                  + ", ".join(f"{k}={v:.1e}" for k, v in viol.items())
                  + f" (limit 1e-6); h=sqrt(q) SOB vs OB relative error gap {rel:.1e} (limit 5%)")
    assert ok


def test_criterion_5_loan_experiment():
    t0 = time.perf_counter()
    runs = [ex.run_loan(LoanParams(seed=s)) for s in range(10)]
    elapsed = time.perf_counter() - t0

    def mean(method, metric):
        return float(np.mean([r[method][metric] for r in runs]))

    cf_ob, cf_ml = mean("ob1", "cf_metric"), mean("ml", "cf_metric")
    acc_gap = abs(mean("ob1", "acc") - mean("ftu", "acc"))
    aa_ob = max(mean("ob1", "aa_gap"), mean("ob2", "aa_gap"))
    parts = {
        "OB1 cf<=0.01": cf_ob <= 0.01,
        "ML cf>=0.2": cf_ml >= 0.2,
        "|acc OB1-FTU|<=0.05": acc_gap <= 0.05,
        "OB aa_gap<=1e-8": aa_ob <= 1e-8,
        "runtime<=60s": elapsed <= 60,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    record(5, ok, f"10 seeds: OB1 cf {cf_ob:.4f}, ML cf {cf_ml:.4f} (ratio {cf_ml / cf_ob:.0f}x), "
                  f"acc gap {acc_gap:.4f}, OB aa_gap {aa_ob:.2e}, {elapsed:.1f}s"
                  + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok


def test_criterion_6_continuous_outcome():
    t0 = time.perf_counter()
    rep = ex.run_cont_y(ContYParams(), methods=("ml", "ftu", "ob1", "ob2"))
    elapsed = time.perf_counter() - t0
    corr_raw = rep["ob2"]["corr_raw"]
    corr_ob = rep["ob2"]["corr_processed"]
    kl_ob, kl_ml, kl_ftu = rep["ob2"]["kl"], rep["ml"]["kl"], rep["ftu"]["kl"]
    rmse_ob, rmse_ftu = rep["ob2"]["rmse"], rep["ftu"]["rmse"]
    parts = {
        "raw corr 0.52+-0.10": abs(corr_raw - 0.52) <= 0.10,
        "OB corr<=0.01": corr_ob <= 0.01,
        "OB KL<=0.05": kl_ob <= 0.05,
        "ML/FTU KL>=0.2": min(kl_ml, kl_ftu) >= 0.2,
        "OB RMSE within 15% of FTU": abs(rmse_ob - rmse_ftu) <= 0.15 * rmse_ftu,
        "runtime<=120s": elapsed <= 120,
    }
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    record(6, ok, f"corr {corr_raw:.3f} -> {corr_ob:.1e}, KL OB2 {kl_ob:.4f} / ML {kl_ml:.3f} / "
                  f"FTU {kl_ftu:.3f}, RMSE OB2 {rmse_ob:.3f} vs FTU {rmse_ftu:.3f} "
                  f"(OB1-AML {rep['ob1']['rmse']:.3f}), {elapsed:.1f}s"
                  + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok


def test_criterion_7_lemma_diagnostic():
    min_gap, max_orth_gap, agree = np.inf, 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n, q, k = 30, 4, 1 + seed % 3
        A = standardize(rng.standard_normal((n, q)) @ rng.standard_normal((q, q)))[0].values
        b = rng.standard_normal(n)
        orthogonal = seed % 2 == 0
        if orthogonal:
            basis = np.column_stack([np.ones(n), truncated_svd(A, k).U_left])
            b -= basis @ np.linalg.lstsq(basis, b, rcond=None)[0]
        else:
            b -= b.mean()
        lemma, gap = lemma_gap_diagnostic(A, b[:, None] / b.std(ddof=1), k)
        min_gap = min(min_gap, gap)
        if orthogonal:
            max_orth_gap = max(max_orth_gap, abs(gap))
        agree += bool(np.isclose(lemma, gap, rtol=1e-6, atol=1e-9))
    ok = min_gap >= -1e-9 and max_orth_gap <= 1e-9
    record(7, ok, f"50 instances, min direct_gap {min_gap:.2e} (>= -1e-9), max |gap| with b orthogonal "
                  f"{max_orth_gap:.2e}; printed formula agreed with direct gap on {agree}/50 (logged only)")
    assert ok


def _drop_constant(A):
    keep = [j for j in range(A.m) if np.ptp(A.values[:, j]) > 0]
    return DataMatrix(A.values[:, keep], tuple(A.col_names[j] for j in keep))


REAL = {
    "adult": ("ORTHOFAIR_ADULT_CSV", "race,sex", "income"),
    "compas": ("ORTHOFAIR_COMPAS_CSV", "race,sex", "two_year_recid"),
}


def test_criterion_8_offline_suite(monkeypatch):
    def no_network(*args, **kwargs):
        raise OSError("network disabled for this test")

    monkeypatch.setattr(socket, "socket", no_network)
    monkeypatch.setattr(socket, "create_connection", no_network)
    r = ex.run_loan(LoanParams(n=600), methods=("ml", "ob2", "sob2"), h=1.2)
    configured = [name for name, (env, *_) in REAL.items() if os.environ.get(env)]
    ok = set(r) == {"ml", "ob2", "sob2"}
    record(8, ok, "property suite and pipelines run with sockets disabled and no real data; "
                  f"real-data checks configured: {configured or 'none (optional, see README)'}")
    assert ok


@pytest.mark.realdata
@pytest.mark.parametrize("name", sorted(REAL))
def test_criterion_8_real_data(name):
    env, sensitive, outcome = REAL[name]
    path = os.environ.get(env)
    if not path:
        pytest.skip(f"set {env} to run")
    ds = read_dataset(path, sensitive=os.environ.get(f"{env}_SENSITIVE", sensitive).split(","),
                      outcome=os.environ.get(f"{env}_OUTCOME", outcome))
    from dataclasses import replace
    ds = replace(ds, A=_drop_constant(ds.A))
    train, test = ex.split(ds, 0.75, 0)
    k = min(10, train.A.m)
    h = max(1.0, 0.5 * np.sqrt(train.A.m))
    pre = ex.Preprocessor.fit(train, "sob", k=k, h=h)
    prep = pre.prepare(train)
    resid = ex.orthogonality_residual(prep.A, prep.B)
    groups = ex.group_labels(test)
    ml, ob2 = ex.fit_method("ml", train), ex.fit_method("ob2", train)
    eo_ml, eo_ob = eo_gap(ml.score(test), test.Y, groups), eo_gap(ob2.score(test), test.Y, groups)
    ok = resid <= 1e-6 and eo_ob <= eo_ml
    record(f"8 ({name})", ok, f"SOB residual {resid:.1e} (<= 1e-6), eo_gap OB2 {eo_ob:.3f} vs ML {eo_ml:.3f}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
