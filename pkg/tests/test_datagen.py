import json
from dataclasses import asdict, replace
from importlib import resources

import numpy as np
import pytest

from orthofair.datagen import (ContYParams, LoanParams, counterfactual_loan, gen_cont_y, gen_loan,
                               intervene_cont_y, loan_groups, read_dataset, write_dataset)
from orthofair.errors import InvalidParams, MissingNoise


def test_defaults_match_packaged_config():
    cfg = json.loads(resources.files("orthofair").joinpath("configs/loan_defaults.json").read_text())
    cfg = {k: v for k, v in cfg.items() if not k.startswith("_")}
    assert cfg == asdict(LoanParams())
    assert LoanParams.from_config() == LoanParams()
    assert LoanParams.from_config(beta_E=2.0).beta_E == 2.0


def test_loan_groups_cumulative_thresholds():
    np.testing.assert_array_equal(loan_groups(np.array([0.1, 0.76, 0.77, 0.92, 0.95])),
                                  [0, 0, 1, 1, 2])


def test_loan_generator_shapes_and_group_shares():
    ds = gen_loan(LoanParams(n=20000, seed=1))
    assert ds.A.col_names == ("E", "I") and ds.B.col_names == ("B",)
    shares = np.bincount(ds.B.values[:, 0].astype(int)) / ds.n
    np.testing.assert_allclose(shares, [0.76, 0.16, 0.08], atol=0.01)
    assert np.all(ds.A.select(["E"]).values >= 0) and np.all(ds.A.select(["I"]).values > 0)
    assert set(np.unique(ds.Y)) <= {0.0, 1.0}


def test_loan_deterministic_and_seed_sensitive():
    a, b = gen_loan(LoanParams(n=100, seed=4)), gen_loan(LoanParams(n=100, seed=4))
    np.testing.assert_array_equal(a.A.values, b.A.values)
    c = gen_loan(LoanParams(n=100, seed=5))
    assert not np.array_equal(a.A.values, c.A.values)


def test_loan_params_validation():
    with pytest.raises(InvalidParams):
        gen_loan(LoanParams(lambda_A0=1.0, lambda_A2=-1.0))
    assert LoanParams().lambda_I2 == LoanParams().lambda_A2


def test_counterfactual_to_own_group_is_identity():
    ds = gen_loan(LoanParams(n=500, seed=2))
    groups = ds.B.values[:, 0]
    for g in (0, 1, 2):
        cf = counterfactual_loan(ds, g)
        rows = groups == g
        np.testing.assert_array_equal(cf.A.values[rows], ds.A.values[rows])
        np.testing.assert_array_equal(cf.Y[rows], ds.Y[rows])
        assert np.all(cf.B.values == g)
    with pytest.raises(MissingNoise):
        counterfactual_loan(replace(ds, noise_record=None), 1)


def test_counterfactual_education_shift_matches_structural_equation():
    p = LoanParams(n=300, seed=3)
    ds = gen_loan(p)
    z_e = ds.noise_record.select(["Z_E"]).values[:, 0]
    cf = counterfactual_loan(ds, 2)
    np.testing.assert_allclose(cf.A.select(["E"]).values[:, 0],
                               np.maximum(0, p.lambda_E0 + p.lambda_E2 + z_e))


def test_cont_y_shapes_split_and_flips():
    p = ContYParams(n=2000, seed=1)
    train, test, cf, mask = gen_cont_y(p)
    assert train.n == 1500 and test.n == 500
    assert train.A.m == p.p_a + p.p_x == 48 and train.B.m == 3
    assert mask.sum() == 400
    flipped = cf.B.values != test.B.values
    np.testing.assert_array_equal(flipped.any(axis=1), mask)
    assert np.all(flipped[mask])
    # X and the noise are shared by the counterfactual copy
    np.testing.assert_array_equal(cf.A.values[:, 40:], test.A.values[:, 40:])
    np.testing.assert_array_equal(cf.A.values[~mask], test.A.values[~mask])


def test_cont_y_structural_equations():
    p = ContYParams(n=50, seed=2)
    train, *_ = gen_cont_y(p)
    eps = train.noise_record.values
    A_expected = (train.B.values.sum(axis=1, keepdims=True) + eps[:, :40]) * np.arange(1, 41)
    np.testing.assert_allclose(train.A.values[:, :40], A_expected)
    np.testing.assert_allclose(train.Y, train.A.values.sum(axis=1) + eps[:, 40])
    same = intervene_cont_y(train, train.B.values)
    np.testing.assert_allclose(same.A.values, train.A.values)


def test_cell_flip_mode():
    _, test, cf, mask = gen_cont_y(ContYParams(n=1000, flip_mode="cell", seed=0))
    flipped = cf.B.values != test.B.values
    assert flipped.sum() == round(0.8 * flipped.size)
    with pytest.raises(InvalidParams):
        gen_cont_y(ContYParams(flip_mode="diagonal"))


def test_csv_roundtrip_keeps_noise_and_params(tmp_path):
    ds = gen_loan(LoanParams(n=200, seed=7))
    write_dataset(ds, tmp_path / "loan")
    back = read_dataset(tmp_path / "loan.csv")
    np.testing.assert_allclose(back.A.values, ds.A.values)
    np.testing.assert_allclose(back.noise_record.values, ds.noise_record.values)
    assert back.scm == ds.scm and back.categorical == ("B",)
    np.testing.assert_allclose(counterfactual_loan(back, 1).A.values, counterfactual_loan(ds, 1).A.values)


def test_read_encodes_string_columns(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("age,job,sex,label\n30,a,M,yes\n40,b,F,no\n50,a,F,yes\n")
    ds = read_dataset(path, sensitive=["sex"], outcome="label")
    assert ds.A.col_names == ("age", "job_b")
    assert ds.B.col_names == ("sex_M",)
    np.testing.assert_array_equal(ds.Y, [1, 0, 1])
    assert ds.scm is None
    with pytest.raises(InvalidParams):
        read_dataset(path, sensitive=["race"], outcome="label")


def test_inert_sensitive_gives_identical_counterfactuals():
    p = LoanParams(n=300, beta_1=0, beta_2=0, lambda_E1=0, lambda_E2=0, lambda_A1=0, lambda_A2=0)
    ds = gen_loan(p)
    for g in (0, 1, 2):
        cf = counterfactual_loan(ds, g)
        np.testing.assert_array_equal(cf.A.values, ds.A.values)
        np.testing.assert_array_equal(cf.Y, ds.Y)
        np.testing.assert_array_equal(counterfactual_loan(cf, g).A.values, cf.A.values)


def test_zero_coefficients_give_fair_coin():
    p = LoanParams(n=100000, beta_0=0, beta_1=0, beta_2=0, beta_E=0, beta_I=0)
    assert abs(gen_loan(p).Y.mean() - 0.5) <= 0.01


def test_loan_outcome_follows_logistic_equation():
    from scipy.special import expit
    p = LoanParams(n=100000, seed=8)
    ds = gen_loan(p)
    E, I = ds.A.values.T
    b = ds.B.values[:, 0]
    prob = expit(p.beta_0 + p.beta_1 * (b == 1) + p.beta_2 * (b == 2) + p.beta_E * E + p.beta_I * I)
    bins = np.digitize(prob, np.linspace(0, 1, 11))
    for k in np.unique(bins):
        rows = bins == k
        if rows.sum() < 500:
            continue
        se = np.sqrt(prob[rows].mean() * (1 - prob[rows].mean()) / rows.sum())
        assert abs(ds.Y[rows].mean() - prob[rows].mean()) <= 4 * se


def test_cont_y_noise_columns_independent_of_b():
    from orthofair.metrics import avg_pairwise_corr
    train, test, *_ = gen_cont_y(ContYParams(seed=3))
    X = train.A.select([f"X{j}" for j in range(1, 9)])
    assert avg_pairwise_corr(X, train.B) <= 0.02
