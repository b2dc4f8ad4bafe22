"""pfn-export: write model predictive distributions as schema-v1 files.

Subcommands: ppd, bootstrap, rollout.  Models: tabpfn (requires the optional
dependency and reachable weights) or stub (local Gaussian, for dry runs).
Exit codes: 0 ok, 1 domain/model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .export import export_bootstrap, export_ppd, export_rollout
from .models import ModelUnavailable, make_model


def _parse_x_rows(raw: list[str]) -> np.ndarray:
    return np.asarray([[float(v) for v in row.split(",")] for row in raw], dtype=float)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pfn-export")
    sub = parser.add_subparsers(dest="command", required=True)

    common = dict(model="stub", seed=0)

    p_ppd = sub.add_parser("ppd", help="export predictive CDFs for query rows")
    p_ppd.add_argument("--train", required=True, help="training CSV (y,x1..xd)")
    p_ppd.add_argument("--x", action="append", required=True, help="comma-separated row; repeatable")
    p_ppd.add_argument("--out-dir", required=True)
    p_ppd.add_argument("--model", default=common["model"], choices=("tabpfn", "stub"))

    p_boot = sub.add_parser("bootstrap", help="export R resampled refits")
    p_boot.add_argument("--train", required=True)
    p_boot.add_argument("--x", action="append", required=True)
    p_boot.add_argument("--out-dir", required=True)
    p_boot.add_argument("--R", type=int, default=20)
    p_boot.add_argument("--seed", type=int, default=common["seed"])
    p_boot.add_argument("--model", default=common["model"], choices=("tabpfn", "stub"))

    p_roll = sub.add_parser("rollout", help="forward-sampling rollouts with refits")
    p_roll.add_argument("--train", required=True)
    p_roll.add_argument("--x", required=True, help="comma-separated query row")
    p_roll.add_argument("--out-dir", required=True)
    p_roll.add_argument("--steps", type=int, default=100)
    p_roll.add_argument("--replicates", type=int, default=5)
    p_roll.add_argument("--seed", type=int, default=common["seed"])
    p_roll.add_argument("--model", default=common["model"], choices=("tabpfn", "stub"))

    args = parser.parse_args(argv)
    try:
        if args.command == "ppd":
            paths = export_ppd(args.train, _parse_x_rows(args.x), args.out_dir, make_model(args.model))
        elif args.command == "bootstrap":
            paths = export_bootstrap(
                args.train,
                _parse_x_rows(args.x),
                args.out_dir,
                lambda: make_model(args.model),
                R=args.R,
                seed=args.seed,
            )
        else:
            paths = export_rollout(
                args.train,
                [float(v) for v in args.x.split(",")],
                args.out_dir,
                lambda: make_model(args.model),
                n_steps=args.steps,
                replicates=args.replicates,
                seed=args.seed,
            )
        for p in paths:
            print(p)
        return 0
    except ModelUnavailable as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
