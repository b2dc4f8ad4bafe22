"""Command-line entry point.

Subcommands: run (posterior for one PPD file), tune-rho, diagnose (forward
drift QQ table), simulate (synthetic datasets), coverage (benchmark from a
JSON config), bootstrap (single bootstrap interval), validate (schema check).

Exit codes: 0 ok, 1 domain or numeric error, 2 usage error.  A JSON config
file can replace flags (--config); explicit flags win.  MP_SEED serves as
the seed fallback.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .engine import EngineConfig, run_posterior
from .griddist import FunctionalSpec, PpdSchemaError, load_ppd_json
from .harness import bootstrap_interval, coverage_run
from .normal import CopulaBandwidth
from .schedules import ScheduleSpec
from .simulate import gen_additive_spline, gen_diffusion, gen_funnel, gen_gamma_iid
from .sources import (
    CopulaForwardSource,
    CopulaRegressionSource,
    Dataset,
    GaussianSource,
    forward_diagnostic,
)
from .tuning import tune_rho

USAGE_ERROR = 2
DOMAIN_ERROR = 1


def _default_seed() -> int:
    return int(os.environ.get("MP_SEED", "0"))


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Overlay a JSON config file under explicitly passed flags."""
    if not getattr(args, "config", None):
        return args
    with open(args.config, "r", encoding="utf-8") as fh:
        file_values = json.load(fh)
    passed = {
        a.dest
        for a in parser._actions
        if any(opt in sys.argv for opt in a.option_strings)
    }
    for key, value in file_values.items():
        dest = key.replace("-", "_")
        if dest not in passed and hasattr(args, dest):
            setattr(args, dest, value)
    return args


def _resolve_initial_ppd(args):
    """Initial predictive from --ppd, or from --data + --source + --x."""
    source_name = args.source
    if args.ppd and (source_name is None or source_name.startswith("file:")):
        return load_ppd_json(args.ppd)
    if source_name is None:
        raise ValueError("need --ppd <file> or --data <csv> with --source and --x")
    if source_name.startswith("file:"):
        return load_ppd_json(source_name[len("file:"):])
    if not args.data or args.x is None:
        raise ValueError(f"--source {source_name} needs --data <csv> and --x <coords>")
    train = Dataset.from_csv(args.data)
    x = [float(v) for v in str(args.x).split(",")]
    if source_name == "gaussian":
        source = GaussianSource()
    elif source_name == "copula-reg":
        source = CopulaRegressionSource()
    else:
        raise ValueError(f"unknown source {source_name!r}")
    return source.fit(train).ppd_at(x)


def _cmd_run(args, parser) -> int:
    args = _merge_config(args, parser)
    p0 = _resolve_initial_ppd(args)
    n_train = int(p0.meta.get("n_train", 0))
    d = max(len(p0.meta.get("x", [])), 1)
    schedule = ScheduleSpec.parse(args.schedule, d=d)
    if str(args.rho) == "auto":
        tuned = tune_rho(p0, schedule, n_train, tuning_size=args.tuning_size, seed=args.seed)
        rho = tuned.rho
    else:
        rho = CopulaBandwidth(float(args.rho))
    functionals = tuple(FunctionalSpec.parse(s) for s in args.functional)
    config = EngineConfig(
        B=args.B,
        N=args.N,
        schedule=schedule,
        rho=rho,
        seed=args.seed,
        n_train=n_train,
        functionals=functionals,
        estimator=args.estimator,
        checkpoints=tuple(args.checkpoint) if args.checkpoint else None,
        level=args.level,
    )
    result = run_posterior(p0, config, threads=args.threads or os.cpu_count())
    payload = result.to_json(include_timing=args.timing, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    if args.trace_out:
        result.write_traces_csv(args.trace_out)
    return 0


def _cmd_tune_rho(args, parser) -> int:
    args = _merge_config(args, parser)
    p0 = load_ppd_json(args.ppd)
    n_train = int(p0.meta.get("n_train", 0))
    d = max(len(p0.meta.get("x", [])), 1)
    schedule = ScheduleSpec.parse(args.schedule, d=d)
    result = tune_rho(
        p0, schedule, n_train, tuning_size=args.tuning_size, seed=args.seed
    )
    print(f"rho={result.rho.rho:.6f}")
    if result.uninformative:
        print("uninformative: tuning sample too small; returned interval midpoint")
    print("rho,score")
    for r, s in result.evaluations:
        print(f"{r:.6f},{s!r}")
    return 0


def _cmd_simulate(args, parser) -> int:
    args = _merge_config(args, parser)
    if args.truth_out and args.kind != "spline":
        raise ValueError("--truth-out is only available for the spline generator")
    if args.kind == "spline":
        ds, truth = gen_additive_spline(
            args.n, J=args.J, signal_count=args.signal_count, sigma2=args.sigma2, seed=args.seed
        )
        if args.truth_out:
            probes = np.linspace(-2.5, 2.5, 10)
            payload = {
                "feature": 0,
                "probe_x1": probes.tolist(),
                "component_mean": [truth.f(0, float(v)) for v in probes],
                "conditional_mean_at_probe_rows": [
                    truth.conditional_mean(np.concatenate([[v], np.zeros(args.J - 1)]))
                    for v in probes
                ],
                "noise_variance": args.sigma2,
            }
            with open(args.truth_out, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True)
                fh.write("\n")
    elif args.kind == "funnel":
        ds = gen_funnel(args.n, seed=args.seed)
    elif args.kind == "diffusion":
        ds = gen_diffusion(args.n, seed=args.seed)
    elif args.kind == "gamma":
        ys = gen_gamma_iid(args.n, seed=args.seed)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("y\n")
            for v in ys:
                fh.write(f"{float(v)!r}\n")
        return 0
    else:  # argparse choices guard this
        raise ValueError(f"unknown kind {args.kind}")
    ds.to_csv(args.out)
    return 0


def _cmd_diagnose(args, parser) -> int:
    args = _merge_config(args, parser)
    p0 = load_ppd_json(args.ppd)
    source = CopulaForwardSource(
        p0,
        ScheduleSpec.parse(args.schedule, d=max(len(p0.meta.get("x", [])), 1)),
        CopulaBandwidth(args.rho),
        int(p0.meta.get("n_train", 0)),
    )
    probes = np.linspace(0.05, 0.95, 19)
    rows = forward_diagnostic(
        source, args.steps, probes, replicates=args.replicates, seed=args.seed
    )
    out = args.out or "-"
    lines = ["k,initial_u,mean_refit_u"] + [
        f"{r['k']},{r['initial_u']!r},{r['mean_refit_u']!r}" for r in rows
    ]
    text = "\n".join(lines) + "\n"
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def _cmd_coverage(args, parser) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    if args.threads is not None:
        config["threads"] = args.threads
    report = coverage_run(config)
    if args.out_csv:
        report.to_csv(args.out_csv)
    print(report.to_json(indent=2))
    return 0


def _cmd_bootstrap(args, parser) -> int:
    args = _merge_config(args, parser)
    train = Dataset.from_csv(args.data).standardized()
    source = GaussianSource().fit(train)
    fspec = FunctionalSpec.parse(args.functional)
    x_std = train.standardization.standardize_x([float(v) for v in args.x.split(",")])
    lo, hi = bootstrap_interval(
        source, train, x_std, fspec, R=args.R, level=args.level, seed=args.seed
    )
    std = train.standardization
    if fspec.kind in ("mean", "quantile"):
        lo, hi = lo * std.y_sd + std.y_mean, hi * std.y_sd + std.y_mean
    print(json.dumps({"lower": lo, "upper": hi, "functional": str(fspec)}, sort_keys=True))
    return 0


def _cmd_validate(args, parser) -> int:
    load_ppd_json(args.ppd)
    print(f"{args.ppd}: valid schema v1")
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="copulamp",
        description="Martingale posteriors for conditional predictive functionals",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    seed_default = _default_seed()

    p_run = sub.add_parser("run", help="posterior from a PPD file or a fitted source")
    p_run.add_argument("--ppd", default=None)
    p_run.add_argument("--source", default=None, help="file:<path> | gaussian | copula-reg")
    p_run.add_argument("--data", default=None, help="training CSV for fitted sources")
    p_run.add_argument("--x", default=None, help="comma-separated query features")
    p_run.add_argument("--B", type=int, default=100)
    p_run.add_argument("--N", type=int, default=250)
    p_run.add_argument("--schedule", default="default")
    p_run.add_argument("--rho", default="auto")
    p_run.add_argument("--functional", action="append", default=None)
    p_run.add_argument("--estimator", choices=("empirical", "final_grid"), default="empirical")
    p_run.add_argument("--level", type=float, default=0.9)
    p_run.add_argument("--seed", type=int, default=seed_default)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.add_argument("--tuning-size", type=int, default=1000)
    p_run.add_argument("--checkpoint", type=int, action="append", default=None)
    p_run.add_argument("--timing", action="store_true")
    p_run.add_argument("--trace-out", default=None)
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--out", default=None)

    p_tune = sub.add_parser("tune-rho", help="bandwidth by prequential score")
    p_tune.add_argument("--ppd", required=True)
    p_tune.add_argument("--schedule", default="default")
    p_tune.add_argument("--tuning-size", type=int, default=1000)
    p_tune.add_argument("--seed", type=int, default=seed_default)
    p_tune.add_argument("--config", default=None)

    p_sim = sub.add_parser("simulate", help="synthetic dataset CSVs")
    p_sim.add_argument("--kind", choices=("spline", "funnel", "diffusion", "gamma"), required=True)
    p_sim.add_argument("--n", type=int, default=100)
    p_sim.add_argument("--J", type=int, default=30)
    p_sim.add_argument("--signal-count", type=int, default=1)
    p_sim.add_argument("--sigma2", type=float, default=0.5)
    p_sim.add_argument("--seed", type=int, default=seed_default)
    p_sim.add_argument("--config", default=None)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--truth-out", default=None, help="spline only: write ground truth JSON")

    p_diag = sub.add_parser("diagnose", help="forward-refit drift QQ table")
    p_diag.add_argument("--ppd", required=True)
    p_diag.add_argument("--schedule", default="default")
    p_diag.add_argument("--rho", type=float, default=0.9)
    p_diag.add_argument("--steps", type=int, default=100)
    p_diag.add_argument("--replicates", type=int, default=100)
    p_diag.add_argument("--seed", type=int, default=seed_default)
    p_diag.add_argument("--config", default=None)
    p_diag.add_argument("--out", default=None)

    p_cov = sub.add_parser("coverage", help="benchmark harness from JSON config")
    p_cov.add_argument("--config", required=True)
    p_cov.add_argument("--threads", type=int, default=None)
    p_cov.add_argument("--out-csv", default=None)

    p_boot = sub.add_parser("bootstrap", help="bootstrap interval on a CSV dataset")
    p_boot.add_argument("--data", required=True)
    p_boot.add_argument("--x", required=True, help="comma-separated feature vector")
    p_boot.add_argument("--functional", default="mean")
    p_boot.add_argument("--R", type=int, default=20)
    p_boot.add_argument("--level", type=float, default=0.9)
    p_boot.add_argument("--seed", type=int, default=seed_default)
    p_boot.add_argument("--config", default=None)

    p_val = sub.add_parser("validate", help="check a PPD file against schema v1")
    p_val.add_argument("ppd")

    subparsers = {
        "run": p_run,
        "tune-rho": p_tune,
        "simulate": p_sim,
        "diagnose": p_diag,
        "coverage": p_cov,
        "bootstrap": p_boot,
        "validate": p_val,
    }
    return parser, subparsers


_HANDLERS = {
    "run": _cmd_run,
    "tune-rho": _cmd_tune_rho,
    "simulate": _cmd_simulate,
    "diagnose": _cmd_diagnose,
    "coverage": _cmd_coverage,
    "bootstrap": _cmd_bootstrap,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "functional", None) is None and args.command == "run":
        args.functional = ["mean"]
    try:
        return _HANDLERS[args.command](args, subparsers[args.command])
    except (ValueError, LookupError, PpdSchemaError, FileNotFoundError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
