"""Export predictive distributions into the versioned grid-CDF JSON schema.

The output format (schema v1) is the consumer contract:

    { "version": 1, "x": [...], "n_train": int,
      "grid": [...], "cdf": [...], "pdf": [...], "meta": {...} }

Labels and features are standardized before fitting; the grid lives in
standardized label space and the applied transform is recorded under
``meta.standardization``.  Raw model CDFs are repaired to be monotone
(cumulative max) and renormalized to carry unit mass over the grid, with a
flag in ``meta`` whenever repair changed anything.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

GRID_SIZE = 1024
SCHEMA_VERSION = 1


def read_training_csv(path):
    """Read the `y,x1..xd` CSV schema; returns (y, X)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "y":
            raise ValueError(f"expected CSV header starting with 'y', got {header!r}")
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1:]


def _standardize(y, X):
    y_mean, y_sd = float(np.mean(y)), float(max(np.std(y), 1e-12))
    x_mean = X.mean(axis=0)
    x_sd = np.maximum(X.std(axis=0), 1e-12)
    info = {
        "y_mean": y_mean,
        "y_sd": y_sd,
        "x_mean": x_mean.tolist(),
        "x_sd": x_sd.tolist(),
    }
    return (y - y_mean) / y_sd, (X - x_mean) / x_sd, info


def _label_grid(y_std):
    """Equally spaced grid over the standardized label range, padded by half an IQR."""
    lo, hi = np.quantile(y_std, [1e-4, 1 - 1e-4])
    pad = 0.5 * (np.quantile(y_std, 0.75) - np.quantile(y_std, 0.25))
    pad = max(pad, 0.5)
    return np.linspace(lo - 3 * pad, hi + 3 * pad, GRID_SIZE)


def _repair(cdf, pdf):
    """Monotone, renormalized CDF (and matching pdf); reports whether repair acted."""
    fixed = np.maximum.accumulate(np.clip(np.asarray(cdf, dtype=float), 0.0, 1.0))
    changed = not np.array_equal(fixed, np.asarray(cdf, dtype=float))
    span = fixed[-1] - fixed[0]
    if span <= 0:
        raise ValueError("model CDF carries no mass over the export grid")
    out_cdf = (fixed - fixed[0]) / span
    out_pdf = np.maximum(np.asarray(pdf, dtype=float), 0.0) / span
    return out_cdf, out_pdf, changed


def _write_ppd(path, x_row, n_train, grid, cdf, pdf, meta):
    payload = {
        "version": SCHEMA_VERSION,
        "x": [float(v) for v in np.atleast_1d(x_row)],
        "n_train": int(n_train),
        "grid": [float(v) for v in grid],
        "cdf": [float(v) for v in cdf],
        "pdf": [float(v) for v in pdf],
        "meta": meta,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def _export_rows(model, y, X, x_rows, out_dir, extra_meta=None):
    y_std, x_std, std_info = _standardize(y, X)
    grid = _label_grid(y_std)
    model.fit(x_std, y_std)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, x_row in enumerate(np.atleast_2d(np.asarray(x_rows, dtype=float))):
        xq = (x_row - np.asarray(std_info["x_mean"])) / np.asarray(std_info["x_sd"])
        raw_cdf, raw_pdf = model.predict_cdf(xq, grid)
        cdf, pdf, repaired = _repair(raw_cdf, raw_pdf)
        meta = {"standardization": std_info, "monotonic_repair": repaired}
        meta.update(extra_meta or {})
        path = out_dir / f"x_{i}.json"
        _write_ppd(path, x_row, y.size, grid, cdf, pdf, meta)
        paths.append(path)
    return paths


def export_ppd(train_csv, x_rows, out_dir, model) -> list:
    """One schema-v1 JSON per query row, named x_<i>.json."""
    y, X = read_training_csv(train_csv)
    return _export_rows(model, y, X, x_rows, out_dir)


def export_bootstrap(train_csv, x_rows, out_dir, model_factory, R: int = 20, seed: int = 0) -> list:
    """R resampled refits, laid out as boot_<r>/x_<i>.json."""
    y, X = read_training_csv(train_csv)
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    paths = []
    for r in range(R):
        idx = gen.integers(0, y.size, size=y.size)
        paths += _export_rows(
            model_factory(),
            y[idx],
            X[idx],
            x_rows,
            Path(out_dir) / f"boot_{r}",
            extra_meta={"bootstrap_replicate": r},
        )
    return paths


def export_rollout(
    train_csv,
    x_row,
    out_dir,
    model_factory,
    n_steps: int = 100,
    replicates: int = 5,
    seed: int = 0,
    probe_levels=(0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95),
    checkpoints=(1, 2, 5, 10, 20, 50, 100),
) -> list:
    """Forward-sampling rollouts with refits after every appended sample.

    Per replicate r, writes rollout_<r>/samples.csv (step, y) and
    rollout_<r>/probes.csv (k, initial_u, refit_u): the refit model's CDF at
    the initial predictive's probe quantiles, the raw material of the
    martingale QQ diagnostic.
    """
    y0, X0 = read_training_csv(train_csv)
    y_std0, x_std0, std_info = _standardize(y0, X0)
    grid = _label_grid(y_std0)
    x_row = np.atleast_1d(np.asarray(x_row, dtype=float))
    xq = (x_row - np.asarray(std_info["x_mean"])) / np.asarray(std_info["x_sd"])

    base = model_factory().fit(x_std0, y_std0)
    init_cdf, _ = base.predict_cdf(xq, grid)
    init_cdf = np.maximum.accumulate(np.clip(init_cdf, 0, 1))
    probe_ys = np.interp(probe_levels, init_cdf, grid)

    out_dir = Path(out_dir)
    written = []
    checkpoints = [c for c in checkpoints if c <= n_steps]
    for r in range(replicates):
        gen = np.random.Generator(np.random.Philox(key=np.array([seed, r + 1], dtype=np.uint64)))
        ys = y_std0.copy()
        xs = x_std0.copy()
        sub = out_dir / f"rollout_{r}"
        sub.mkdir(parents=True, exist_ok=True)
        samples = []
        probes = []
        model = model_factory().fit(xs, ys)
        for k in range(1, n_steps + 1):
            cdf, _ = model.predict_cdf(xq, grid)
            cdf = np.maximum.accumulate(np.clip(cdf, 0, 1))
            u = gen.random()
            span = cdf[-1] - cdf[0]
            y_new = float(np.interp(cdf[0] + u * span, cdf, grid))
            samples.append((k, y_new))
            ys = np.append(ys, y_new)
            xs = np.vstack([xs, xq])
            model = model_factory().fit(xs, ys)
            if k in checkpoints:
                refit_cdf, _ = model.predict_cdf(xq, grid)
                refit_cdf = np.maximum.accumulate(np.clip(refit_cdf, 0, 1))
                refit_u = np.interp(probe_ys, grid, refit_cdf)
                probes += [
                    (k, float(lvl), float(ru)) for lvl, ru in zip(probe_levels, refit_u)
                ]
        with open(sub / "samples.csv", "w", encoding="utf-8") as fh:
            fh.write("step,y\n")
            for k, v in samples:
                fh.write(f"{k},{v!r}\n")
        with open(sub / "probes.csv", "w", encoding="utf-8") as fh:
            fh.write("k,initial_u,refit_u\n")
            for k, lvl, ru in probes:
                fh.write(f"{k},{lvl!r},{ru!r}\n")
        written.append(sub)
    return written
