"""Experiment harness: data generation, boosting, fitting, reporting.

Subcommands: ``gen-data``, ``boost``, ``fit``, ``sensitivity``, ``oracle``,
``run`` (full experiment) and ``report``.  Every emitted CSV starts with
'#'-prefixed comment lines embedding the resolved configuration and master
seed, so any artifact can be reproduced from its own header.  Exit codes:
0 success, 2 invalid configuration, 3 numerical failure.

Configs for ``run`` may come from a flat ``key=value`` file; command-line
flags override file values.  All randomness flows from one master seed
through named streams (data / test / features / splits / noise), with
per-repeat substreams.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import index_sets as isets
from .boosting import BoostConfig, boost_dependent, boost_independent
from .features import CoefficientVector, FeatureSet, draw_feature_set, assemble_matrix
from .index_sets import AnovaIndexSet
from .oracles import oracle_sobol_independent
from .sampling import (
    STANDARD_NORMAL,
    STREAM_DATA,
    STREAM_REPEAT,
    STREAM_TEST,
    DataDistributionSpec,
    FeatureDensitySpec,
    SampleSet,
    covariance_model,
    label_samples,
    read_samples_csv,
    sample_data,
    stream_seed,
    uniform_marginal,
    write_samples_csv,
)
from .sensitivity import sobol_indices_dependent
from .solvers import SolverFailure, SolverOptions
from .sparse_fit import HtpConfig, PruneSchedule, fit_harfe, fit_shrimp, mse

RESULT_COLUMNS = ["fn", "d", "q", "M", "N", "dist", "method", "boosted", "repeat", "mse", "elapsed_s", "seed"]


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    fn: str = "friedmann9"
    d: int = 9
    M: int = 500
    q: int = 2
    n_mult: int = 5
    eps: float = 0.01
    lam_boost: float = 1e-6
    lam_fit: float = 1e-6
    method: str = "shrimp"
    boosted: bool = True
    alg: str = "auto"  # auto | indep | dep
    repeats: int = 1
    seed: int = 0
    dist: str = "gauss-cov"
    sigma_model: str = "id"
    copula: str = "clayton"
    theta: float = 2.0
    marginal: str = "std-normal"
    box: str = "0,1"
    density: str = "gaussian"
    feature_sigma: float | None = None
    s: int = 64
    noise: float = 0.0
    solver_tol: float = 1e-8

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.method not in ("shrimp", "harfe"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.alg not in ("auto", "indep", "dep"):
            raise ValueError(f"unknown alg {self.alg!r}")
        if self.M < 2 or self.d < 1 or self.q < 1 or self.n_mult < 1:
            raise ValueError("M, d, q, n_mult must be positive (M >= 2)")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def parse_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line (want key=value): {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _coerce(cfg_cls, key, val):
    for f in fields(cfg_cls):
        if f.name == key:
            if f.type in ("int", int):
                return int(val)
            if f.type in ("float", float):
                return float(val)
            if f.type in ("bool", bool):
                return str(val).lower() in ("1", "true", "yes")
            if "float | None" in str(f.type):
                return None if str(val).lower() in ("", "none") else float(val)
            return val
    raise ValueError(f"unknown config key {key!r}")


def _parse_marginal(text: str):
    if text in ("std-normal", "standard-normal", "normal"):
        return STANDARD_NORMAL
    if text in ("uniform01",):
        return uniform_marginal(0.0, 1.0)
    if text.startswith("uniform:"):
        a, b = (float(v) for v in text.split(":", 1)[1].split(","))
        return uniform_marginal(a, b)
    raise ValueError(f"unknown marginal {text!r}")


def build_distribution(cfg: ExperimentConfig) -> DataDistributionSpec:
    if cfg.dist == "gauss-cov":
        return DataDistributionSpec(
            "gaussian-cov", cfg.d, covariance=covariance_model(cfg.sigma_model, cfg.d)
        )
    if cfg.dist == "copula":
        return DataDistributionSpec(
            "copula",
            cfg.d,
            copula_family=cfg.copula,
            theta=cfg.theta,
            marginals=[_parse_marginal(cfg.marginal)] * cfg.d,
        )
    if cfg.dist == "uniform":
        a, b = (float(v) for v in cfg.box.split(","))
        return DataDistributionSpec("uniform-box", cfg.d, bounds=(a, b))
    raise ValueError(f"unknown dist {cfg.dist!r}")


def dist_token(cfg: ExperimentConfig) -> str:
    if cfg.dist == "gauss-cov":
        return f"gauss-cov:{cfg.sigma_model}"
    if cfg.dist == "copula":
        return f"copula:{cfg.copula}:{cfg.theta:g}"
    return f"uniform:{cfg.box}"


def feature_density(cfg: ExperimentConfig) -> FeatureDensitySpec:
    sigma = cfg.feature_sigma if cfg.feature_sigma is not None else 1.0 / np.sqrt(cfg.q)
    smooth = 1.5 if cfg.density == "sobolev-tensor" else None
    return FeatureDensitySpec(cfg.density, scale=sigma, smoothness=smooth)


def header_comments(pairs: dict) -> list:
    return [f"{k}={pairs[k]}" for k in sorted(pairs)]


def _write_csv(path, rows, comments):
    with open(path, "w") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerows(rows)


def _read_csv(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if not rows:
        return [], []
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# experiment core


def _is_independent(cfg: ExperimentConfig) -> bool:
    if cfg.alg != "auto":
        return cfg.alg == "indep"
    if cfg.dist == "uniform":
        return True
    if cfg.dist == "gauss-cov":
        return cfg.sigma_model == "id"
    return False


def run_experiment(cfg: ExperimentConfig):
    """Run repeats of (sample, optionally boost, fit, score); returns result rows.

    Emits one row per repeat plus a final mean row; failed repeats record
    ``mse=nan`` and the run continues.
    """
    spec = build_distribution(cfg)
    density = feature_density(cfg)
    n_features = cfg.n_mult * cfg.M
    rows = []
    mses, times = [], []
    for rep in range(cfg.repeats):
        rep_seed = int(stream_seed(cfg.seed, STREAM_REPEAT, rep).generate_state(1)[0])
        t0 = time.perf_counter()
        try:
            train = sample_data(spec, cfg.M, stream_seed(rep_seed, STREAM_DATA))
            train = label_samples(train, cfg.fn, cfg.noise, rep_seed)
            test = sample_data(spec, cfg.M, stream_seed(rep_seed, STREAM_TEST))
            test = label_samples(test, cfg.fn)
            if cfg.boosted:
                mode = "independent" if _is_independent(cfg) else "dependent"
                bcfg = BoostConfig(
                    q=cfg.q,
                    eps=cfg.eps,
                    n_features=n_features,
                    lam=cfg.lam_boost,
                    density=density,
                    seed=rep_seed,
                    mode=mode,
                    solver=SolverOptions(tol=cfg.solver_tol),
                )
                boost = boost_independent if mode == "independent" else boost_dependent
                U, _trace = boost(train, bcfg)
            else:
                U = isets.all_subsets_of_order(cfg.d, cfg.q)
            features = draw_feature_set(U, n_features, density, seed=rep_seed)
            if cfg.method == "shrimp":
                a, _kept, _val = fit_shrimp(
                    features, train, lam=cfg.lam_fit, schedule=PruneSchedule(), seed=rep_seed
                )
            else:
                a, _support, _stab = fit_harfe(
                    features, train, HtpConfig(sparsity=min(cfg.s, features.n_total), ridge=cfg.lam_fit)
                )
            err = mse(features, a, test)
        except (SolverFailure, np.linalg.LinAlgError, ArithmeticError, ValueError) as exc:
            print(f"repeat {rep} failed: {exc}", file=sys.stderr)
            rows.append(_result_row(cfg, n_features, rep, float("nan"), time.perf_counter() - t0))
            continue
        elapsed = time.perf_counter() - t0
        mses.append(err)
        times.append(elapsed)
        rows.append(_result_row(cfg, n_features, rep, err, elapsed))
    mean_mse = float(np.mean(mses)) if mses else float("nan")
    mean_t = float(np.mean(times)) if times else float("nan")
    rows.append(_result_row(cfg, n_features, "mean", mean_mse, mean_t))
    return rows


def _result_row(cfg, n_features, rep, err, elapsed):
    return [
        cfg.fn,
        cfg.d,
        cfg.q,
        cfg.M,
        n_features,
        dist_token(cfg),
        cfg.method,
        int(cfg.boosted),
        rep,
        repr(float(err)),
        f"{elapsed:.3f}",
        cfg.seed,
    ]


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    cfg = _config_from_args(args)
    spec = build_distribution(cfg)
    data = sample_data(spec, cfg.M, stream_seed(cfg.seed, STREAM_DATA))
    data = label_samples(data, cfg.fn, cfg.noise, cfg.seed)
    write_samples_csv(args.out, data, header_comments(cfg.as_dict()))
    print(f"wrote {cfg.M} samples of {cfg.fn} (d={cfg.d}) to {args.out}")
    return 0


def cmd_boost(args) -> int:
    data = read_samples_csv(args.data)
    cfg = ExperimentConfig(
        fn="(file)",
        d=data.dimension,
        M=data.count,
        q=args.q,
        n_mult=args.n_mult,
        eps=args.eps,
        lam_boost=getattr(args, "lambda"),
        seed=args.seed,
        density=args.density,
        feature_sigma=args.feature_sigma,
        solver_tol=args.solver_tol,
    )
    mode = "independent" if args.alg == "indep" else "dependent"
    bcfg = BoostConfig(
        q=cfg.q,
        eps=cfg.eps,
        n_features=cfg.n_mult * data.count,
        lam=cfg.lam_boost,
        density=feature_density(cfg),
        seed=cfg.seed,
        mode=mode,
        solver=SolverOptions(tol=cfg.solver_tol),
    )
    boost = boost_independent if mode == "independent" else boost_dependent
    U, trace = boost(data, bcfg)
    with open(args.out, "w") as fh:
        fh.write(U.to_json() + "\n")
    if args.trace:
        _write_csv(args.trace, trace.csv_rows(), header_comments({"alg": args.alg, **cfg.as_dict()}))
    for warning in trace.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"U = {U.to_text() or '-'} ({len(U)} terms) -> {args.out}")
    return 0


def _load_index_set(args, d) -> AnovaIndexSet:
    if args.U:
        with open(args.U) as fh:
            return AnovaIndexSet.from_json(fh.read(), d)
    return isets.all_subsets_of_order(d, args.q)


def cmd_fit(args) -> int:
    train = read_samples_csv(args.data)
    U = _load_index_set(args, train.dimension)
    q_eff = max((len(u) for u in U.terms), default=1) or 1
    cfg = ExperimentConfig(
        fn="(file)",
        d=train.dimension,
        M=train.count,
        q=q_eff,
        n_mult=args.n_mult,
        lam_fit=getattr(args, "lambda"),
        method=args.method,
        seed=args.seed,
        density=args.density,
        feature_sigma=args.feature_sigma,
        s=args.s,
    )
    features = draw_feature_set(U, cfg.n_mult * train.count, feature_density(cfg), seed=cfg.seed)
    if cfg.method == "shrimp":
        a, kept, val_mse = fit_shrimp(features, train, lam=cfg.lam_fit, seed=cfg.seed)
        extra = {"val_mse": val_mse, "nnz": int(kept.sum())}
    else:
        a, support, stab = fit_harfe(
            features, train, HtpConfig(sparsity=min(cfg.s, features.n_total), ridge=cfg.lam_fit)
        )
        extra = {"nnz": len(support), "stabilized": stab}
    model = {
        "features": json.loads(features.to_json()),
        "coefficients": json.loads(a.to_json()),
        "meta": {**cfg.as_dict(), **extra, "U": json.loads(U.to_json())},
    }
    with open(args.out, "w") as fh:
        json.dump(model, fh)
    report_rows = [["key", "value"], ["train_mse", repr(mse(features, a, train))]]
    for k, v in extra.items():
        report_rows.append([k, repr(v) if isinstance(v, float) else v])
    if args.test:
        test = read_samples_csv(args.test)
        report_rows.append(["test_mse", repr(mse(features, a, test))])
    if args.report:
        _write_csv(args.report, report_rows, header_comments(cfg.as_dict()))
    print("\n".join(f"{k}: {v}" for k, v in report_rows[1:]))
    return 0


def load_model(path):
    with open(path) as fh:
        model = json.load(fh)
    features = FeatureSet.from_json(json.dumps(model["features"]))
    a = CoefficientVector.from_json(json.dumps(model["coefficients"]), features)
    return features, a, model.get("meta", {})


def cmd_sensitivity(args) -> int:
    features, a, meta = load_model(args.model)
    data = read_samples_csv(args.data)
    A = assemble_matrix(features, data)
    report = sobol_indices_dependent(A, a, data.labels, seed=meta.get("seed"))
    _write_csv(args.out, report.csv_rows(), header_comments({"model": args.model, "data": args.data}))
    print(f"wrote sensitivity report ({len(report.variance_indices)} terms) to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    terms = None
    if args.terms:
        terms = [u if u else () for u in (tuple(int(i) for i in part.split(",") if i) for part in args.terms.split(";"))]
    shares, meta = oracle_sobol_independent(
        args.fn,
        marginal=_parse_marginal(args.marginal),
        m_outer=args.m_outer,
        m_inner=args.m_inner,
        seed=args.seed,
        terms=terms,
    )
    rows = [["u", "share", "stderr"]]
    for u, (share, err) in sorted(shares.items(), key=lambda kv: (len(kv[0]), kv[0])):
        rows.append([",".join(map(str, u)), repr(share), repr(err)])
    comments = header_comments(
        {"fn": args.fn, "marginal": args.marginal, "m_outer": args.m_outer, "m_inner": args.m_inner,
         "seed": args.seed, "mean": meta["mean"], "variance": meta["variance"]}
    )
    if args.out:
        _write_csv(args.out, rows, comments)
    print("\n".join(f"{r[0] or 'total'}: {float(r[1]):.4f} +- {3*float(r[2]):.4f}" for r in rows[1:]))
    return 0


def cmd_run(args) -> int:
    overrides = {}
    if args.config:
        overrides.update(parse_config_file(args.config))
    for key in list(overrides):
        overrides[key] = _coerce(ExperimentConfig, key, overrides[key])
    for f in fields(ExperimentConfig):
        val = getattr(args, f.name.replace("-", "_"), None)
        if val is not None:
            overrides[f.name] = val
    cfg = ExperimentConfig(**overrides)
    if args.dry_run:
        print("resolved experiment plan:")
        for k, v in sorted(cfg.as_dict().items()):
            print(f"  {k} = {v}")
        return 0
    rows = run_experiment(cfg)
    out_rows = [RESULT_COLUMNS] + rows
    _write_csv(args.out, out_rows, header_comments(cfg.as_dict()))
    print(_format_table(RESULT_COLUMNS, rows))
    return 0


def _format_table(header, rows) -> str:
    cells = [list(map(str, header))] + [list(map(str, r)) for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines)


def cmd_report(args) -> int:
    all_rows = []
    header = None
    for path in args.inputs:
        try:
            h, rows = _read_csv(path)
        except (OSError, csv.Error) as exc:
            raise ValueError(f"cannot parse {path}: {exc}")
        if not h:
            continue
        if header is None:
            header = h
        elif h != header:
            raise ValueError(f"{path}: header {h} differs from {header}")
        for i, row in enumerate(rows):
            if len(row) != len(header):
                raise ValueError(f"{path}: line {i + 2} has {len(row)} fields, want {len(header)}")
        all_rows.extend(rows)
    if header is None:
        print("(empty report)")
        return 0
    if header[:2] == ["u", "s_var"]:
        # sensitivity report: renormalize shares over the merged rows
        total = sum(float(r[1]) for r in all_rows)
        out = [header]
        for r in all_rows:
            r = list(r)
            r[4] = repr(float(r[1]) / total if total else 0.0)
            out.append(r)
        print(_format_table(out[0], out[1:]))
        if args.out:
            _write_csv(args.out, out, [f"normalized_by={total!r}"])
        return 0
    print(_format_table(header, all_rows))
    if args.out:
        _write_csv(args.out, [header] + all_rows, [])
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _config_from_args(args) -> ExperimentConfig:
    kwargs = {}
    for f in fields(ExperimentConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            kwargs[f.name] = val
    return ExperimentConfig(**kwargs)


def _add_common_data_flags(p):
    p.add_argument("--fn", default=None, help="test function name")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--M", type=int, default=None, help="number of samples")
    p.add_argument("--dist", default=None, choices=["gauss-cov", "copula", "uniform"])
    p.add_argument("--sigma-model", dest="sigma_model", default=None, choices=["id", "equi", "mixed"])
    p.add_argument("--copula", default=None, choices=["clayton", "gumbel", "frank"])
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--marginal", default=None, help="std-normal | uniform:a,b | uniform01")
    p.add_argument("--box", default=None, help="uniform-box bounds a,b")
    p.add_argument("--noise", type=float, default=None, help="label noise std")
    p.add_argument("--seed", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anova-rff", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample inputs and labels to CSV")
    _add_common_data_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("boost", help="find the significant interaction terms")
    p.add_argument("--alg", required=True, choices=["indep", "dep"])
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--N-mult", dest="n_mult", type=int, default=5)
    p.add_argument("--lambda", type=float, default=1e-6)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", default="gaussian", choices=["gaussian", "cauchy", "sobolev-tensor"])
    p.add_argument("--feature-sigma", dest="feature_sigma", type=float, default=None)
    p.add_argument("--solver-tol", dest="solver_tol", type=float, default=1e-8)
    p.add_argument("--out", required=True, help="index set JSON")
    p.add_argument("--trace", default=None, help="round-by-round trace CSV")
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("fit", help="fit a sparse random-feature model")
    p.add_argument("--method", required=True, choices=["shrimp", "harfe"])
    p.add_argument("--U", default=None, help="index set JSON (from boost)")
    p.add_argument("--q", type=int, default=2, help="plain q-sparse features when no --U")
    p.add_argument("--data", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--N-mult", dest="n_mult", type=int, default=5)
    p.add_argument("--lambda", type=float, default=1e-6)
    p.add_argument("--s", type=int, default=64, help="HARFE sparsity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", default="gaussian", choices=["gaussian", "cauchy", "sobolev-tensor"])
    p.add_argument("--feature-sigma", dest="feature_sigma", type=float, default=None)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--report", default=None, help="MSE report CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sensitivity", help="Sobol indices of a fitted model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("oracle", help="brute-force Sobol shares (independent inputs)")
    p.add_argument("--fn", required=True)
    p.add_argument("--marginal", default="std-normal")
    p.add_argument("--m-outer", dest="m_outer", type=int, default=200_000)
    p.add_argument("--m-inner", dest="m_inner", type=int, default=2_000)
    p.add_argument("--terms", default=None, help="semicolon-separated terms, e.g. '3;4;1,2'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("run", help="full experiment (repeats of sample/boost/fit/score)")
    p.add_argument("--config", default=None, help="flat key=value config file")
    _add_common_data_flags(p)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--N-mult", dest="n_mult", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--lam-boost", dest="lam_boost", type=float, default=None)
    p.add_argument("--lam-fit", dest="lam_fit", type=float, default=None)
    p.add_argument("--method", default=None, choices=["shrimp", "harfe"])
    p.add_argument("--boosted", dest="boosted", action="store_true", default=None)
    p.add_argument("--no-boost", dest="boosted", action="store_false")
    p.add_argument("--alg", default=None, choices=["auto", "indep", "dep"])
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--density", default=None, choices=["gaussian", "cauchy", "sobolev-tensor"])
    p.add_argument("--feature-sigma", dest="feature_sigma", type=float, default=None)
    p.add_argument("--solver-tol", dest="solver_tol", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--dry-run", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize result or sensitivity CSVs")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailure, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
