"""Seeded synthetic data from structural causal models, with exact
counterfactual regeneration from the retained exogenous draws, and CSV
emission/ingestion.

Loan model (three groups, education E and income I drive approval Y)::

    B = 1{U_B > 0.76} + 1{U_B > 0.92}            U_B ~ Uniform(0, 1)
    U_E = mu_E(B) + Z_E,  E = max(0, U_E)
    U_I = log(lam_A0 + lam_A1 1{B=1} + lam_A2 1{B=2}) + Z_I
    I = exp(0.1 U_E + U_I)
    Y = 1{U_Y < expit(b0 + b1 1{B=1} + b2 1{B=2} + bE E + bI I)}

Continuous-outcome model with p_b Bernoulli sensitive columns::

    A_j = (sum_i B_i + e_j) * j,   X ~ N(0, p_a p_b 0.05),   Y = sum A + sum X + e
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import InvalidParams, MissingNoise, ShapeMismatch
from .matrix import DataMatrix

LOAN_THRESHOLDS = (0.76, 0.92)


@dataclass(frozen=True)
class Dataset:
    A: DataMatrix
    B: DataMatrix
    Y: np.ndarray
    noise_record: DataMatrix | None = None
    scm: object | None = None            # generator params when synthetic
    categorical: tuple[str, ...] = ()    # sensitive columns to one-hot encode
    outcome_name: str = "Y"

    def __post_init__(self):
        y = np.asarray(self.Y, dtype=float).ravel()
        if not (self.A.n == self.B.n == y.size):
            raise ShapeMismatch(f"row counts differ: A {self.A.n}, B {self.B.n}, Y {y.size}")
        if self.noise_record is not None and self.noise_record.n != y.size:
            raise ShapeMismatch("noise record rows differ from data rows")
        y.setflags(write=False)
        object.__setattr__(self, "Y", y)

    @property
    def n(self):
        return self.Y.size

    def take_rows(self, rows) -> Dataset:
        noise = None if self.noise_record is None else self.noise_record.take_rows(rows)
        return replace(self, A=self.A.take_rows(rows), B=self.B.take_rows(rows),
                       Y=self.Y[rows], noise_record=noise)


# ---------------------------------------------------------------- loan model

@dataclass(frozen=True)
class LoanParams:
    lambda_E0: float = 3.0
    lambda_E1: float = -0.2
    lambda_E2: float = -0.4
    lambda_A0: float = 3.0
    lambda_A1: float = -0.1
    lambda_A2: float = -0.2
    beta_0: float = -1.5
    beta_1: float = -2.0
    beta_2: float = -3.0
    beta_E: float = 0.4
    beta_I: float = 0.02
    n: int = 5000
    seed: int = 0

    # income shifts are written lambda_I* in places; same parameters
    @property
    def lambda_I0(self):
        return self.lambda_A0

    @property
    def lambda_I1(self):
        return self.lambda_A1

    @property
    def lambda_I2(self):
        return self.lambda_A2

    def validate(self):
        if self.n < 1:
            raise InvalidParams("n must be >= 1")
        for g, shift in enumerate((0.0, self.lambda_A1, self.lambda_A2)):
            if self.lambda_A0 + shift <= 0:
                raise InvalidParams(f"income scale for group {g} is nonpositive; log undefined")

    @classmethod
    def from_config(cls, path=None, **overrides) -> LoanParams:
        """Load defaults from the packaged config (or `path`), then apply overrides."""
        if path is None:
            text = resources.files("orthofair").joinpath("configs/loan_defaults.json").read_text()
        else:
            text = Path(path).read_text()
        data = {k: v for k, v in json.loads(text).items() if not k.startswith("_")}
        data.update(overrides)
        return cls(**data)


LOAN_NOISE = ("U_B", "Z_E", "Z_I", "U_Y")


def loan_groups(u_b):
    lo, hi = LOAN_THRESHOLDS
    return (u_b > lo).astype(int) + (u_b > hi).astype(int)


def _loan_equations(b, z_e, z_i, u_y, p: LoanParams):
    g1, g2 = (b == 1).astype(float), (b == 2).astype(float)
    u_e = p.lambda_E0 + g1 * p.lambda_E1 + g2 * p.lambda_E2 + z_e
    u_i = np.log(p.lambda_A0 + g1 * p.lambda_A1 + g2 * p.lambda_A2) + z_i
    E = np.maximum(0.0, u_e)
    I = np.exp(0.1 * u_e + u_i)
    logit = p.beta_0 + p.beta_1 * g1 + p.beta_2 * g2 + p.beta_E * E + p.beta_I * I
    Y = (u_y < expit(logit)).astype(float)
    return E, I, Y


def gen_loan(params: LoanParams | None = None) -> Dataset:
    p = params or LoanParams()
    p.validate()
    rng = np.random.default_rng(p.seed)
    u_b = rng.uniform(size=p.n)
    z_e = rng.standard_normal(p.n)
    z_i = rng.standard_normal(p.n)
    u_y = rng.uniform(size=p.n)
    b = loan_groups(u_b)
    E, I, Y = _loan_equations(b, z_e, z_i, u_y, p)
    return Dataset(
        A=DataMatrix(np.column_stack([E, I]), ("E", "I")),
        B=DataMatrix(b[:, None].astype(float), ("B",)),
        Y=Y,
        noise_record=DataMatrix(np.column_stack([u_b, z_e, z_i, u_y]), LOAN_NOISE),
        scm=p,
        categorical=("B",),
    )


def counterfactual_loan(ds: Dataset, target_group) -> Dataset:
    """Set every row's group to `target_group` and regenerate E, I, Y from the
    retained exogenous draws."""
    if ds.noise_record is None or not isinstance(ds.scm, LoanParams):
        raise MissingNoise("dataset carries no loan noise record; cannot regenerate counterfactuals")
    if target_group not in (0, 1, 2):
        raise InvalidParams(f"unknown group {target_group!r}")
    noise = ds.noise_record.select(LOAN_NOISE[1:]).values
    b = np.full(ds.n, int(target_group))
    E, I, Y = _loan_equations(b, noise[:, 0], noise[:, 1], noise[:, 2], ds.scm)
    return replace(ds, A=DataMatrix(np.column_stack([E, I]), ds.A.col_names),
                   B=DataMatrix(b[:, None].astype(float), ds.B.col_names), Y=Y)


# ------------------------------------------------------- continuous-Y model

@dataclass(frozen=True)
class ContYParams:
    n: int = 10000
    p_b: int = 3
    p_a: int = 40
    p_x: int = 8
    noise_sd_y: float = 0.5
    noise_sd_a: float = 0.5
    bernoulli_p: float = 0.7
    cf_fraction: float = 0.8
    split_fraction: float = 0.75
    flip_mode: str = "row"   # "row": flip every B_i of a chosen row; "cell": flip chosen (row, i) entries
    seed: int = 0

    def validate(self):
        if min(self.n, self.p_b, self.p_a, self.p_x) < 1:
            raise InvalidParams("counts must be >= 1")
        for name in ("bernoulli_p", "cf_fraction", "split_fraction"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise InvalidParams(f"{name} must lie in (0, 1], got {v}")
        if self.flip_mode not in ("row", "cell"):
            raise InvalidParams(f"unknown flip_mode {self.flip_mode!r}")

    @property
    def x_sd(self):
        return float(np.sqrt(self.p_a * self.p_b * 0.05))


def _cont_y_equations(B, eps_a, X, eps_y, p: ContYParams):
    scale = np.arange(1, p.p_a + 1, dtype=float)
    A = (B.sum(axis=1, keepdims=True) + eps_a) * scale
    Y = A.sum(axis=1) + X.sum(axis=1) + eps_y
    return A, Y


def _cont_y_dataset(B, eps_a, X, eps_y, p):
    A, Y = _cont_y_equations(B, eps_a, X, eps_y, p)
    a_names = tuple(f"A{j + 1}" for j in range(p.p_a)) + tuple(f"X{j + 1}" for j in range(p.p_x))
    noise_names = tuple(f"eA{j + 1}" for j in range(p.p_a)) + ("eY",)
    return Dataset(
        A=DataMatrix(np.hstack([A, X]), a_names),
        B=DataMatrix(B, tuple(f"B{i + 1}" for i in range(p.p_b))),
        Y=Y,
        noise_record=DataMatrix(np.column_stack([eps_a, eps_y]), noise_names),
        scm=p,
    )


def intervene_cont_y(ds: Dataset, B_new) -> Dataset:
    """Regenerate A and Y with sensitive matrix `B_new`, keeping all noise and X."""
    if ds.noise_record is None or not isinstance(ds.scm, ContYParams):
        raise MissingNoise("dataset carries no continuous-Y noise record")
    p = ds.scm
    B_new = np.asarray(B_new, dtype=float)
    if B_new.shape != ds.B.shape:
        raise ShapeMismatch(f"B_new shape {B_new.shape} != {ds.B.shape}")
    noise = ds.noise_record.values
    X = ds.A.values[:, p.p_a:]
    return _cont_y_dataset(B_new, noise[:, :p.p_a], X, noise[:, p.p_a], p)


def gen_cont_y(params: ContYParams | None = None):
    """Return (train, test, counterfactual_test, flipped_mask)."""
    p = params or ContYParams()
    p.validate()
    rng = np.random.default_rng(p.seed)
    B = (rng.uniform(size=(p.n, p.p_b)) < p.bernoulli_p).astype(float)
    eps_a = rng.normal(0.0, p.noise_sd_a, size=(p.n, p.p_a))
    X = rng.normal(0.0, p.x_sd, size=(p.n, p.p_x))
    eps_y = rng.normal(0.0, p.noise_sd_y, size=p.n)
    full = _cont_y_dataset(B, eps_a, X, eps_y, p)

    perm = rng.permutation(p.n)
    n_train = int(round(p.split_fraction * p.n))
    train_rows = np.sort(perm[:n_train])
    test_rows = np.sort(perm[n_train:]) if n_train < p.n else np.sort(perm[:0])
    train, test = full.take_rows(train_rows), full.take_rows(test_rows)

    n_test = test.n
    if p.flip_mode == "row":
        mask = np.zeros(n_test, dtype=bool)
        mask[rng.choice(n_test, size=int(round(p.cf_fraction * n_test)), replace=False)] = True
        flip = np.repeat(mask[:, None], p.p_b, axis=1)
    else:
        cells = np.zeros(n_test * p.p_b, dtype=bool)
        cells[rng.choice(cells.size, size=int(round(p.cf_fraction * cells.size)), replace=False)] = True
        flip = cells.reshape(n_test, p.p_b)
        mask = flip.any(axis=1)
    B_cf = np.where(flip, 1.0 - test.B.values, test.B.values)
    cf = intervene_cont_y(test, B_cf)
    return train, test, cf, mask


# ------------------------------------------------------------------- CSV I/O

def _params_dict(scm):
    if scm is None:
        return None
    return {"generator": "loan" if isinstance(scm, LoanParams) else "cont_y", **asdict(scm)}


def _params_from(d):
    if not d:
        return None
    d = dict(d)
    gen = d.pop("generator")
    return LoanParams(**d) if gen == "loan" else ContYParams(**d)


def write_dataset(ds: Dataset, stem) -> list[Path]:
    """Write ``<stem>.csv`` (features, sensitive, outcome), ``<stem>.json``
    sidecar, and ``<stem>.noise.csv`` when a noise record exists."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = list(ds.A.col_names) + list(ds.B.col_names) + [ds.outcome_name]
    data = np.column_stack([ds.A.values, ds.B.values, ds.Y])
    csv_path = stem.with_suffix(".csv")
    np.savetxt(csv_path, data, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
    written = [csv_path]
    sidecar = {
        "features": list(ds.A.col_names),
        "sensitive": list(ds.B.col_names),
        "categorical": list(ds.categorical),
        "outcome": ds.outcome_name,
        "params": _params_dict(ds.scm),
        "noise": None,
    }
    if ds.noise_record is not None:
        noise_path = stem.with_suffix(".noise.csv")
        np.savetxt(noise_path, ds.noise_record.values, delimiter=",",
                   header=",".join(ds.noise_record.col_names), comments="", fmt="%.17g")
        sidecar["noise"] = noise_path.name
        written.append(noise_path)
    side_path = stem.with_suffix(".json")
    side_path.write_text(json.dumps(sidecar, indent=2))
    written.append(side_path)
    return written


def read_dataset(csv_path, sidecar=None, sensitive=None, outcome=None, categorical=None) -> Dataset:
    """Load a dataset CSV.

    Column roles come from the JSON sidecar (default ``<csv stem>.json``) or
    the explicit arguments, which take precedence. Non-numeric columns are
    one-hot encoded with the first (sorted) level dropped.
    """
    import pandas as pd

    csv_path = Path(csv_path)
    side = {}
    side_path = Path(sidecar) if sidecar else csv_path.with_suffix(".json")
    if side_path.exists():
        side = json.loads(side_path.read_text())
    sensitive = list(sensitive or side.get("sensitive") or [])
    outcome = outcome or side.get("outcome") or "Y"
    if not sensitive:
        raise InvalidParams("no sensitive columns given (sidecar or --sensitive)")
    cat = list(categorical if categorical is not None else side.get("categorical", []))

    df = pd.read_csv(csv_path, skipinitialspace=True, float_precision="round_trip")
    missing = [c for c in sensitive + [outcome] if c not in df.columns]
    if missing:
        raise InvalidParams(f"{csv_path}: columns not found: {missing}")
    df = df.dropna()
    features = side.get("features") or [c for c in df.columns if c not in sensitive and c != outcome]

    y = df[outcome]
    if not np.issubdtype(y.dtype, np.number):
        levels = sorted(y.unique())
        if len(levels) != 2:
            raise InvalidParams(f"non-numeric outcome {outcome!r} must be binary, got {levels}")
        y = (y == levels[1]).astype(float)

    def encode(cols):
        frame = df[cols]
        obj = [c for c in cols if not np.issubdtype(frame[c].dtype, np.number)]
        enc = pd.get_dummies(frame, columns=obj, drop_first=True, dtype=float) if obj else frame
        return DataMatrix(enc.to_numpy(dtype=float), tuple(str(c) for c in enc.columns)), obj

    A, _ = encode(features)
    # numeric-coded categorical sensitive columns are one-hot encoded later, by the pipeline
    B, _ = encode(sensitive)
    noise = None
    scm = _params_from(side.get("params"))
    if side.get("noise"):
        noise_path = csv_path.parent / side["noise"]
        if noise_path.exists():
            nd = pd.read_csv(noise_path, float_precision="round_trip")
            noise = DataMatrix(nd.to_numpy(dtype=float), tuple(nd.columns))
    if noise is None:
        scm = None
    return Dataset(A=A, B=B, Y=y.to_numpy(dtype=float), noise_record=noise, scm=scm,
                   categorical=tuple(c for c in cat if c in B.col_names), outcome_name=outcome)


def beta_sweep(grid, base: LoanParams | None = None, methods=None, seeds: int = 10):
    """See :func:`orthofair.experiments.beta_sweep`."""
    from .experiments import beta_sweep as _sweep

    return _sweep(grid, base=base, methods=methods, seeds=seeds)
