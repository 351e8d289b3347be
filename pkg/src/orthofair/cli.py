"""Command-line entry point.

    orthofair generate  --generator loan|cont-y --out DIR [--n N] [--seed S] [--param KEY=VALUE ...]
    orthofair transform --input CSV --method ob|sob|none --out DIR [--k K] [--h H]
    orthofair evaluate  --train CSV [--test CSV] [--cf CSV] --methods ml,ftu,ob1,ob2 --out DIR
    orthofair sweep     --grid 0,1,2 --seeds 10 --out FILE.tsv
    orthofair report    FILE.json [FILE.json ...] [--out FILE.tsv]

Every subcommand accepts ``--config FILE.json`` whose keys are flag names
(dashes or underscores); flags given on the command line win. Failures exit
nonzero with a JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import datagen, experiments
from .datagen import ContYParams, Dataset, LoanParams
from .errors import InvalidParams
from .experiments import METHODS, Preprocessor, fit_method, orthogonality_residual
from .metrics import MetricsReport, avg_pairwise_corr, modification_norm, rmse
from .ob import svd_tail_error

log = logging.getLogger("orthofair")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# defaults applied after the config file and the flags have been merged
DEFAULTS = {
    "generate": {"generator": "loan", "seed": 0, "param": []},
    "transform": {"method": "ob", "eta": 1e-6, "max_iters": 500, "seed": 0, "basis": "residual",
                  "scale": "original"},
    "evaluate": {"methods": "ml,ftu,ob1,ob2", "predictor": "auto", "eta": 1e-6, "max_iters": 500,
                 "seed": 0, "basis": "residual", "split_fraction": 0.75},
    "sweep": {"grid": "0,0.25,0.5,0.75,1", "seeds": 10, "methods": ",".join(experiments.LOAN_METHODS),
              "param": []},
    "report": {},
}


def _dump(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _csv_list(v):
    if v is None or isinstance(v, (list, tuple)):
        return v
    return [x.strip() for x in str(v).split(",") if x.strip()]


def _parse_param(items):
    out = {}
    for item in items or []:
        if isinstance(item, dict):
            out.update(item)
            continue
        if "=" not in item:
            raise InvalidParams(f"--param expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        try:
            out[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            out[key.strip()] = val.strip()
    return out


def _build_params(cls, overrides):
    names = {f.name for f in fields(cls)}
    alias = {"lambda_I0": "lambda_A0", "lambda_I1": "lambda_A1", "lambda_I2": "lambda_A2"}
    clean = {}
    for k, v in overrides.items():
        k = alias.get(k, k)
        if k not in names:
            raise InvalidParams(f"unknown {cls.__name__} field {k!r}")
        clean[k] = v
    p = cls.from_config(**clean) if cls is LoanParams else cls(**clean)
    p.validate()
    return p


def _read(path, args, **kw) -> Dataset:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(2, "dataset not found", str(p))
    return datagen.read_dataset(p, sensitive=_csv_list(args.sensitive), outcome=args.outcome,
                                categorical=_csv_list(args.categorical), **kw)


def _shape_summary(paths):
    out = []
    for p in paths:
        if p.suffix == ".csv":
            with open(p) as fh:
                header = fh.readline().strip().split(",")
                rows = sum(1 for _ in fh)
            out.append({"path": str(p), "rows": rows, "columns": len(header)})
    return out


# ---------------------------------------------------------------- commands

def cmd_generate(args):
    out = Path(args.out)
    overrides = _parse_param(args.param)
    if args.n is not None:
        overrides["n"] = args.n
    overrides["seed"] = args.seed
    if args.generator == "loan":
        params = _build_params(LoanParams, overrides)
        written = datagen.write_dataset(datagen.gen_loan(params), out / "loan")
    elif args.generator in ("cont-y", "cont_y"):
        params = _build_params(ContYParams, overrides)
        train, test, cf, mask = datagen.gen_cont_y(params)
        written = []
        for name, ds in (("train", train), ("test", test), ("cf", cf)):
            written += datagen.write_dataset(ds, out / name)
        mask_path = out / "cf_mask.csv"
        np.savetxt(mask_path, mask.astype(int), fmt="%d", header="flipped", comments="")
        written.append(mask_path)
    else:
        raise InvalidParams(f"unknown generator {args.generator!r}")
    summary = {"generator": args.generator, "files": _shape_summary(written)}
    print(json.dumps(summary, indent=2))
    return 0


def cmd_transform(args):
    if args.method not in ("ob", "sob", "none"):
        raise InvalidParams(f"unknown transform method {args.method!r}")
    if args.method == "sob" and args.h is None:
        raise InvalidParams("method sob requires --h")
    ds = _read(args.input, args)
    out = Path(args.out)
    pre = Preprocessor.fit(ds, args.method, k=args.k, h=args.h, eta=args.eta,
                           max_iters=args.max_iters, seed=args.seed, basis=args.basis)
    prep = pre.prepare(ds)
    A_std = pre.a_params.apply(ds.A)
    log.info("standardized A and B with sample means/stdevs (ddof=1)")
    report = {
        "method": args.method,
        "n": ds.n,
        "features": list(ds.A.col_names),
        "sensitive_encoded": list(prep.B.col_names),
        "standardization": {
            "means": dict(zip(ds.A.col_names, pre.a_params.means.tolist())),
            "stdevs": dict(zip(ds.A.col_names, pre.a_params.stdevs.tolist())),
        },
        "orthogonality_residual": orthogonality_residual(prep.A, prep.B),
        "modification_norm": modification_norm(A_std, prep.A),
    }
    fac = pre.factor
    if args.method == "ob":
        report.update(k=fac.k, recon_error=fac.recon_error, svd_error=fac.svd_error)
    elif args.method == "sob":
        U = fac.U_hat
        report.update(
            k=fac.k, h=args.h,
            recon_error=float(np.linalg.norm(A_std.values - fac.reconstruct())),
            svd_error=svd_tail_error(A_std.values, fac.k),
            basis_nonzeros=[int(c) for c in np.count_nonzero(np.abs(U) > 1e-12, axis=0)],
            basis_l1=[float(v) for v in np.abs(U).sum(axis=0)],
            converged=[bool(c) for c in fac.converged],
            iterations=[int(t) for t in fac.iters],
        )
    else:
        report.update(recon_error=0.0, svd_error=0.0)

    if args.method == "none":
        A_out = ds.A
        report["modification_norm"] = 0.0
    elif args.scale == "original":
        A_out = pre.a_params.invert(prep.A)
    else:
        A_out = prep.A
    written = datagen.write_dataset(
        Dataset(A=A_out, B=ds.B, Y=ds.Y, categorical=ds.categorical, outcome_name=ds.outcome_name),
        out / "transformed")
    report["scale"] = args.scale if args.method != "none" else "original"
    _dump(report, out / "transform_report.json")
    print(json.dumps({"files": _shape_summary(written) + [{"path": str(out / "transform_report.json")}],
                      "orthogonality_residual": report["orthogonality_residual"]}, indent=2))
    return 0


def _reports_json(reports, config):
    return {"config": config,
            "reports": {m: {"values": r.values, "provenance": r.provenance} for m, r in reports.items()}}


def _reports_tsv(reports):
    lines = ["method\tmetric\tvalue"]
    for m, r in reports.items():
        for k in sorted(r.values):
            lines.append(f"{m}\t{k}\t{r.values[k]:.10g}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args):
    methods = _csv_list(args.methods)
    for m in methods:
        if m != "none" and m not in METHODS:
            raise InvalidParams(f"unknown method {m!r}; choose from {METHODS}")
    if any(m.startswith("sob") for m in methods) and args.h is None:
        raise InvalidParams("sob methods require --h")
    train = _read(args.train, args)
    if args.test:
        test = _read(args.test, args)
    else:
        train, test = experiments.split(train, args.split_fraction, args.seed)
    kind = args.predictor
    if kind == "auto":
        kind = "logistic" if np.all(np.isin(train.Y, (0.0, 1.0))) else "linear"

    fitted, pres = {}, {}
    for m in methods:
        transform = "ob" if m.startswith("ob") else "sob" if m.startswith("sob") else "none"
        fm = fit_method(m, train, kind, k=args.k, h=args.h, eta=args.eta, max_iters=args.max_iters,
                        seed=args.seed, basis=args.basis, pre=pres.get(transform))
        pres[transform] = fm.pre
        fitted[m] = fm

    if kind == "logistic":
        scm_ok = isinstance(test.scm, LoanParams) and test.noise_record is not None
        worlds, mode = (experiments.loan_worlds(test), "scm") if scm_ok else (None, "substitution")
        reports = experiments.evaluate_binary(fitted, test, worlds, mode)
    else:
        if args.cf:
            cf = _read(args.cf, args)
            reports = experiments.evaluate_continuous(fitted, test, cf)
        else:
            reports = {}
            for m, fm in fitted.items():
                rep = MetricsReport()
                rep.add("rmse", rmse(fm.score(test), test.Y))
                reports[m] = rep

    for m, fm in fitted.items():
        prep = fm.pre.prepare(train)
        if fm.pre.transform != "none":
            reports[m].add("ortho_residual", orthogonality_residual(prep.A, prep.B),
                           "max |A~^T B| / n on the standardized training split")
        reports[m].add("corr_processed", avg_pairwise_corr(prep.A, prep.B),
                       "mean |corr| of training features with encoded B")

    out = Path(args.out)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config", "verbose")}
    config["predictor"] = kind
    _dump(_reports_json(reports, config), out / "metrics.json")
    (out / "metrics.tsv").write_text(_reports_tsv(reports))
    print(_reports_tsv(reports), end="")
    return 0


def cmd_sweep(args):
    grid = [float(x) for x in _csv_list(args.grid)]
    base = _build_params(LoanParams, _parse_param(args.param))
    methods = tuple(_csv_list(args.methods))
    for m in methods:
        if m not in METHODS:
            raise InvalidParams(f"unknown method {m!r}")
    rows = experiments.beta_sweep(grid, base=base, methods=methods, seeds=int(args.seeds))
    tsv = experiments.rows_to_tsv(rows)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(tsv)
    print(tsv, end="")
    return 0


def cmd_report(args):
    lines = ["source\tmethod\tmetric\tvalue"]
    for path in args.inputs:
        p = Path(path)
        d = json.loads(p.read_text())
        if "reports" in d:
            for m, r in d["reports"].items():
                for k in sorted(r["values"]):
                    lines.append(f"{p}\t{m}\t{k}\t{r['values'][k]:.10g}")
        elif "orthogonality_residual" in d:
            for k in ("orthogonality_residual", "modification_norm", "recon_error", "svd_error"):
                if k in d:
                    lines.append(f"{p}\t{d['method']}\t{k}\t{d[k]:.10g}")
        else:
            raise InvalidParams(f"{p}: not a metrics or transform report")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


# ------------------------------------------------------------------ parser

def _data_flags(sp):
    sp.add_argument("--sensitive", help="comma-separated sensitive columns (default: sidecar)")
    sp.add_argument("--outcome", help="outcome column (default: sidecar, else Y)")
    sp.add_argument("--categorical", help="comma-separated sensitive columns to one-hot encode")


def _factor_flags(sp):
    sp.add_argument("--k", type=int, help="rank (default: number of features)")
    sp.add_argument("--h", type=float, help="l1 budget per SOB basis vector")
    sp.add_argument("--eta", type=float)
    sp.add_argument("--max-iters", dest="max_iters", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--basis", choices=("residual", "data"),
                    help="OB right basis: SVD of the B-residualized A (exact) or of A")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="orthofair", description="Orthogonal-to-bias fairness pre-processing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("--generator", choices=("loan", "cont-y", "cont_y"))
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--param", action="append", help="generator field override KEY=VALUE")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("transform", help="fit OB/SOB and write the processed features")
    t.add_argument("--input")
    t.add_argument("--method", choices=("ob", "sob", "none"))
    t.add_argument("--scale", choices=("original", "standardized"),
                   help="units of the written features")
    _data_flags(t)
    _factor_flags(t)
    t.add_argument("--out")
    t.set_defaults(func=cmd_transform)

    e = sub.add_parser("evaluate", help="train predictors and compute metrics")
    e.add_argument("--train")
    e.add_argument("--test", help="pre-split test CSV (default: seeded split of --train)")
    e.add_argument("--cf", help="counterfactual test CSV aligned with --test (continuous outcome)")
    e.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    e.add_argument("--predictor", choices=("auto", "logistic", "linear"))
    e.add_argument("--split-fraction", dest="split_fraction", type=float)
    _data_flags(e)
    _factor_flags(e)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="loan experiment over a beta_E grid")
    s.add_argument("--grid", help="comma-separated beta_E values")
    s.add_argument("--seeds", type=int)
    s.add_argument("--methods")
    s.add_argument("--param", action="append", help="LoanParams override KEY=VALUE")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="tabulate metrics/transform JSON reports")
    r.add_argument("inputs", nargs="*")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    for sp in (g, t, e, s, r):
        sp.add_argument("--config", help="JSON file of flag values; flags win")
    return parser


REQUIRED = {"generate": ("out",), "transform": ("input", "out"), "evaluate": ("train", "out"),
            "sweep": (), "report": ("inputs",)}


def resolve(args) -> argparse.Namespace:
    """Merge config file values under the flags, then fill defaults."""
    ns = vars(args)
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        for key, val in cfg.items():
            key = key.replace("-", "_")
            if key not in ns or key in ("func", "command", "config"):
                raise InvalidParams(f"unknown config key {key!r} for {args.command}")
            if ns[key] is None or ns[key] == []:
                ns[key] = val
    for key, val in DEFAULTS[args.command].items():
        if ns.get(key) is None:
            ns[key] = val
    for key in REQUIRED[args.command]:
        if not ns.get(key):
            raise UsageError(f"{args.command}: missing required option --{key.replace('_', '-')}")
    return args


def _error(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    path = getattr(exc, "filename", None)
    if path:
        payload["path"] = str(path)
        payload["message"] = exc.strerror or str(exc)
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        resolve(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        return _error(exc, 2)
    except SystemExit as exc:   # --help
        return int(exc.code or 0)
    except Exception as exc:    # noqa: BLE001 - every failure becomes a JSON error
        return _error(exc, 1)


if __name__ == "__main__":
    sys.exit(main())
