"""Pluggable providers of initial predictive distributions.

A source turns (dataset, query features) into a grid CDF the engine can
start from.  Three families are provided:

* file-backed, for distributions exported by an external model;
* a local-Gaussian baseline fitted from the k nearest neighbors;
* a kernel-weighted recursive copula regression, usable both as a
  standalone predictive and as an alternative initializer.

Sources declare optional capabilities: ``can_refit`` (refit on a resampled
dataset, needed for the bootstrap) and ``can_forward`` (absorb one new
observation, needed for the martingale drift diagnostic).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import rng
from .engine import (
    DRAW_EPS,
    copula_update,
    decade_checkpoints,
    update_rows_at_levels,
)
from .griddist import (
    DEFAULT_GRID_SIZE,
    GridDistribution,
    default_grid,
    interp_cdf_rows,
    interp_rows,
    load_ppd_json,
    tabulate_cdf,
)
from .normal import CopulaBandwidth
from .schedules import ScheduleSpec, alpha

__all__ = [
    "Dataset",
    "Standardization",
    "PpdSource",
    "FileSource",
    "GaussianSource",
    "CopulaRegressionSource",
    "CopulaForwardSource",
    "DriftingSource",
    "file_source",
    "gaussian_source",
    "copula_regression_source",
    "forward_diagnostic",
]

VARIANCE_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Standardization:
    """Per-column location/scale applied to a dataset, kept for inversion."""

    y_mean: float
    y_sd: float
    x_mean: np.ndarray
    x_sd: np.ndarray

    def destandardize_y(self, v):
        return np.asarray(v) * self.y_sd + self.y_mean

    def standardize_x(self, x):
        return (np.asarray(x, dtype=float) - self.x_mean) / self.x_sd


@dataclass(frozen=True)
class Dataset:
    """Tabular labels and features, optionally standardized.

    ``standardization`` records the transform already applied to the stored
    values, so predictions can be mapped back to original units.
    """

    y: np.ndarray
    x: np.ndarray
    names: tuple | None = None
    standardization: Standardization | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim != 1 or x.shape[0] != y.size:
            raise ValueError(f"label/feature shapes disagree: {y.shape} vs {x.shape}")
        if y.size < 2:
            raise ValueError("dataset needs at least 2 rows")
        if x.shape[1] < 1:
            raise ValueError("dataset needs at least 1 feature")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("dataset contains non-finite values")
        y.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def standardized(self) -> "Dataset":
        """Center/scale every column; scales are floored to avoid zero division."""
        if self.standardization is not None:
            return self
        x_mean = self.x.mean(axis=0)
        x_sd = np.maximum(self.x.std(axis=0), 1e-12)
        y_mean = float(self.y.mean())
        y_sd = max(float(self.y.std()), 1e-12)
        std = Standardization(y_mean, y_sd, x_mean, x_sd)
        return Dataset(
            (self.y - y_mean) / y_sd,
            (self.x - x_mean) / x_sd,
            self.names,
            std,
        )

    def resample(self, generator: np.random.Generator) -> "Dataset":
        idx = generator.integers(0, self.n, size=self.n)
        return Dataset(self.y[idx], self.x[idx], self.names, self.standardization)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.y[idx], self.x[idx], self.names, self.standardization)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "y":
                raise ValueError(f"expected CSV header starting with 'y', got {header!r}")
            rows = [[float(v) for v in row] for row in reader if row]
        arr = np.asarray(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1:], tuple(header))

    def to_csv(self, path) -> None:
        names = self.names or ("y", *(f"x{j + 1}" for j in range(self.d)))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for i in range(self.n):
                writer.writerow([repr(float(self.y[i]))] + [repr(float(v)) for v in self.x[i]])


# ---------------------------------------------------------------------------
# source interface
# ---------------------------------------------------------------------------

class PpdSource:
    """Base capability interface for initial-PPD providers."""

    can_refit = False
    can_forward = False

    def fit(self, dataset: Dataset) -> "PpdSource":
        return self

    def ppd_at(self, x) -> GridDistribution:
        raise NotImplementedError

    def refit_on(self, dataset: Dataset, replicate: int = 0) -> "PpdSource":
        raise NotImplementedError(
            f"{type(self).__name__} does not support refitting; the bootstrap needs a refit-capable source"
        )

    def forward_refit(self, y_new: float) -> "PpdSource":
        raise NotImplementedError(
            f"{type(self).__name__} does not support forward refits; the drift diagnostic needs one"
        )


# ---------------------------------------------------------------------------
# file-backed source
# ---------------------------------------------------------------------------

class FileSource(PpdSource):
    """Serves distributions from schema-v1 JSON files keyed by feature vector.

    ``path`` is a single file or a directory of files.  Supplying a
    ``refit_dir`` containing ``boot_<r>/`` subdirectories enables the
    bootstrap capability: replicate r is served from ``boot_<r>``.
    """

    def __init__(self, path, refit_dir=None):
        self.path = Path(path)
        self.refit_dir = None if refit_dir is None else Path(refit_dir)
        self.can_refit = self.refit_dir is not None
        self._table: list[tuple[np.ndarray, GridDistribution]] = []
        files = sorted(self.path.glob("*.json")) if self.path.is_dir() else [self.path]
        if not files:
            raise FileNotFoundError(f"no PPD json files under {self.path}")
        for f in files:
            dist = load_ppd_json(f)
            self._table.append((np.asarray(dist.meta.get("x", []), dtype=float), dist))

    def ppd_at(self, x) -> GridDistribution:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        for stored, dist in self._table:
            if stored.size == x.size and np.all(np.abs(stored - x) <= 1e-9):
                return dist
        available = [stored.tolist() for stored, _ in self._table]
        raise LookupError(f"no stored PPD for x={x.tolist()}; available x: {available}")

    def refit_on(self, dataset: Dataset, replicate: int = 0) -> "FileSource":
        if self.refit_dir is None:
            return super().refit_on(dataset, replicate)
        sub = self.refit_dir / f"boot_{replicate}"
        if not sub.is_dir():
            raise FileNotFoundError(f"no bootstrap export {sub}")
        return FileSource(sub)


def file_source(path, refit_dir=None) -> FileSource:
    return FileSource(path, refit_dir)


# ---------------------------------------------------------------------------
# local Gaussian baseline
# ---------------------------------------------------------------------------

class GaussianSource(PpdSource):
    """Nearest-neighbor Gaussian predictive.

    For a query x, the K = min(n, 30) nearest training rows (Euclidean
    distance in internally standardized features) supply the mean and
    variance of a normal predictive, inflated by 1/K for estimation noise.
    """

    can_refit = True

    def __init__(self, k_max: int = 30, grid_size: int = DEFAULT_GRID_SIZE):
        self.k_max = k_max
        self.grid_size = grid_size
        self._ds: Dataset | None = None
        self._x_mean = None
        self._x_sd = None
        self._xs = None

    def fit(self, dataset: Dataset) -> "GaussianSource":
        if dataset.n < 2:
            raise ValueError("gaussian source needs at least 2 rows")
        self._ds = dataset
        self._x_mean = dataset.x.mean(axis=0)
        self._x_sd = np.maximum(dataset.x.std(axis=0), 1e-12)
        self._xs = (dataset.x - self._x_mean) / self._x_sd
        return self

    def _check_fitted(self):
        if self._ds is None:
            raise RuntimeError("source not fitted; call fit(dataset) first")

    def ppd_at(self, x) -> GridDistribution:
        self._check_fitted()
        ds = self._ds
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if x_arr.size != ds.d:
            raise ValueError(f"query has {x_arr.size} features, dataset has {ds.d}")
        xq = (x_arr - self._x_mean) / self._x_sd
        k = min(ds.n, self.k_max)
        d2 = np.sum((self._xs - xq) ** 2, axis=1)
        neighbors = np.argpartition(d2, k - 1)[:k]
        ys = ds.y[neighbors]
        m = float(np.mean(ys))
        s2 = max(float(np.var(ys, ddof=1)), VARIANCE_FLOOR)
        sd_pred = math.sqrt(s2 * (1.0 + 1.0 / k))
        grid = default_grid(lambda q: norm.ppf(q, m, sd_pred), self.grid_size)
        return tabulate_cdf(
            grid,
            norm.cdf(grid, m, sd_pred),
            norm.pdf(grid, m, sd_pred),
            {"x": np.atleast_1d(np.asarray(x, dtype=float)).tolist(), "n_train": ds.n},
        )

    def refit_on(self, dataset: Dataset, replicate: int = 0) -> "GaussianSource":
        return GaussianSource(self.k_max, self.grid_size).fit(dataset)


def gaussian_source(k_max: int = 30, grid_size: int = DEFAULT_GRID_SIZE) -> GaussianSource:
    return GaussianSource(k_max, grid_size)


# ---------------------------------------------------------------------------
# recursive copula regression
# ---------------------------------------------------------------------------

class CopulaRegressionSource(PpdSource):
    """Conditional predictive built by one kernel-weighted recursive pass.

    The recursion starts every conditional CDF at the standard normal and
    feeds the training points through the copula update, damping each step
    by a Gaussian kernel in (standardized) feature space:

        w_i(x) = alpha_i * exp(-||x - x_i||^2 / (2 tau^2)).

    During fitting one CDF per training point is maintained so that each
    observation's probability level v_i = P_{i-1}(y_i | x_i) can be recorded;
    a query then replays the recursion for its own CDF only, reusing the
    cached levels.  When tau/rho are not given, both are picked by
    prequential log score over a 10 x 10 grid.
    """

    can_refit = True

    def __init__(
        self,
        tau: float | None = None,
        rho0: CopulaBandwidth | float | None = None,
        grid_size: int = DEFAULT_GRID_SIZE,
        tune_max_rows: int = 150,
        tune_grid_size: int = 256,
    ):
        if tau is not None and tau <= 0:
            raise ValueError(f"kernel width tau must be positive, got {tau}")
        self.tau = tau
        self.rho0 = None if rho0 is None else (
            rho0 if isinstance(rho0, CopulaBandwidth) else CopulaBandwidth(rho0)
        )
        self.grid_size = grid_size
        self.tune_max_rows = tune_max_rows
        self.tune_grid_size = tune_grid_size
        self._ds = None
        self._internal_std = None
        self._grid = None
        self._vs = None
        self._alphas = None

    # -- fitting ------------------------------------------------------------

    def fit(self, dataset: Dataset) -> "CopulaRegressionSource":
        # The recursion wants roughly unit-scale labels for its standard-normal
        # start.  Data arriving unstandardized is transformed internally and
        # queries/outputs are mapped back; pre-standardized data is used as-is.
        if dataset.standardization is None:
            ds = dataset.standardized()
            self._internal_std = ds.standardization
        else:
            ds = dataset
            self._internal_std = None
        self._ds = ds
        if self.tau is None or self.rho0 is None:
            self.tau, self.rho0 = self._tune(ds)
        self._grid = default_grid(norm.ppf, self.grid_size)
        self._vs, self._alphas = self._training_pass(ds, self._grid, self.tau, self.rho0.rho)
        return self

    @staticmethod
    def _kernel(xs: np.ndarray, xi: np.ndarray, tau: float) -> np.ndarray:
        return np.exp(-np.sum((xs - xi) ** 2, axis=1) / (2.0 * tau * tau))

    @staticmethod
    def _base_cdf_pdf(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        base = norm.cdf(grid)
        scale = base[-1] - base[0]
        return (base - base[0]) / scale, norm.pdf(grid) / scale

    def _training_pass(self, ds: Dataset, grid: np.ndarray, tau: float, rho: float):
        """Run the n-row recursion, returning cached levels v_i and base weights.

        Every maintained CDF (one per training point) is revised against the
        shared level v_i, the i-th observation's probability under its own
        conditional CDF just before step i.
        """
        n = ds.n
        base_cdf, _ = self._base_cdf_pdf(grid)
        cdf_rows = np.repeat(base_cdf[None, :], n, axis=0)
        alphas = alpha(ScheduleSpec.default(), np.arange(1, n + 1))
        vs = np.empty(n)
        for i in range(n):
            vs[i] = interp_cdf_rows(grid, cdf_rows[i][None, :], ds.y[i : i + 1])[0]
            w = alphas[i] * self._kernel(ds.x, ds.x[i], tau)
            cdf_rows, _ = update_rows_at_levels(cdf_rows, None, vs[i], w, rho)
        return vs, alphas

    def _tune(self, ds: Dataset) -> tuple[float, CopulaBandwidth]:
        """Grid search for (tau, rho) by prequential log score; fixed values are kept."""
        sub = ds if ds.n <= self.tune_max_rows else ds.subset(np.arange(self.tune_max_rows))
        grid = default_grid(norm.ppf, self.tune_grid_size)
        taus = [self.tau] if self.tau is not None else list(np.sqrt(ds.d) * np.geomspace(0.1, 10.0, 10))
        rhos = [self.rho0.rho] if self.rho0 is not None else list(np.linspace(0.05, 0.95, 10))
        best = (-np.inf, taus[0], rhos[0])
        for tau in taus:
            for r in rhos:
                score = self._prequential_score(sub, grid, float(tau), float(r))
                if score > best[0]:
                    best = (score, float(tau), float(r))
        return best[1], CopulaBandwidth(best[2])

    def _prequential_score(self, ds: Dataset, grid: np.ndarray, tau: float, rho: float) -> float:
        n = ds.n
        base_cdf, base_pdf = self._base_cdf_pdf(grid)
        cdf_rows = np.repeat(base_cdf[None, :], n, axis=0)
        pdf_rows = np.repeat(base_pdf[None, :], n, axis=0)
        score = 0.0
        alphas = alpha(ScheduleSpec.default(), np.arange(1, n + 1))
        for i in range(n):
            dens = interp_rows(grid, pdf_rows[i][None, :], ds.y[i : i + 1])[0]
            score += math.log(max(dens, 1e-300))
            v = interp_cdf_rows(grid, cdf_rows[i][None, :], ds.y[i : i + 1])[0]
            w = alphas[i] * self._kernel(ds.x, ds.x[i], tau)
            cdf_rows, pdf_rows = update_rows_at_levels(cdf_rows, pdf_rows, v, w, rho)
        return score

    # -- queries --------------------------------------------------------------

    def ppd_at(self, x) -> GridDistribution:
        if self._ds is None:
            raise RuntimeError("source not fitted; call fit(dataset) first")
        ds = self._ds
        x_orig = np.atleast_1d(np.asarray(x, dtype=float))
        std = self._internal_std
        xq = std.standardize_x(x_orig) if std is not None else x_orig
        grid = self._grid
        base_cdf, base_pdf = self._base_cdf_pdf(grid)
        row_cdf = base_cdf[None, :]
        row_pdf = base_pdf[None, :]
        rho = self.rho0.rho
        kernel = self._kernel(ds.x, xq, self.tau)
        for i in range(ds.n):
            w = self._alphas[i] * kernel[i]
            row_cdf, row_pdf = update_rows_at_levels(row_cdf, row_pdf, self._vs[i], w, rho)
        meta = {"x": x_orig.tolist(), "n_train": ds.n}
        if std is not None:
            out_grid = grid * std.y_sd + std.y_mean
            return tabulate_cdf(out_grid, row_cdf[0], row_pdf[0] / std.y_sd, meta)
        return tabulate_cdf(grid, row_cdf[0], row_pdf[0], meta)

    def refit_on(self, dataset: Dataset, replicate: int = 0) -> "CopulaRegressionSource":
        clone = CopulaRegressionSource(
            self.tau, self.rho0, self.grid_size, self.tune_max_rows, self.tune_grid_size
        )
        return clone.fit(dataset)


def copula_regression_source(
    tau: float | None = None, rho0=None, **kwargs
) -> CopulaRegressionSource:
    return CopulaRegressionSource(tau, rho0, **kwargs)


# ---------------------------------------------------------------------------
# forward-refit sources for the martingale drift diagnostic
# ---------------------------------------------------------------------------

class CopulaForwardSource(PpdSource):
    """Forward process that refits by the copula update itself (a martingale)."""

    can_forward = True

    def __init__(
        self,
        dist: GridDistribution,
        schedule: ScheduleSpec,
        rho: CopulaBandwidth | float,
        n_train: int,
        steps_done: int = 0,
    ):
        self.dist = dist
        self.schedule = schedule
        self.rho = rho if isinstance(rho, CopulaBandwidth) else CopulaBandwidth(rho)
        self.n_train = n_train
        self.steps_done = steps_done

    def ppd_at(self, x=None) -> GridDistribution:
        return self.dist

    def forward_refit(self, y_new: float) -> "CopulaForwardSource":
        k = self.steps_done + 1
        updated = copula_update(
            self.dist, y_new, alpha(self.schedule, self.n_train + k), self.rho
        )
        return CopulaForwardSource(updated, self.schedule, self.rho, self.n_train, k)


class DriftingSource(PpdSource):
    """Deliberately non-martingale forward process: each refit shifts location."""

    can_forward = True

    def __init__(self, dist: GridDistribution, shift: float = 0.1):
        self.dist = dist
        self.shift = shift

    def ppd_at(self, x=None) -> GridDistribution:
        return self.dist

    def forward_refit(self, y_new: float) -> "DriftingSource":
        moved = GridDistribution(
            self.dist.grid + self.shift, self.dist.cdf, self.dist.pdf, dict(self.dist.meta)
        )
        return DriftingSource(moved, self.shift)


def forward_diagnostic(
    source: PpdSource,
    n_steps: int,
    probe_quantiles,
    replicates: int = 100,
    seed: int = 0,
    checkpoints=None,
) -> list[dict]:
    """QQ table of a forward process against its own initial distribution.

    Rolls the source forward ``n_steps`` refits, ``replicates`` times; at each
    checkpoint k records the refit CDF evaluated at the initial distribution's
    probe quantiles, averaged over replicates.  A martingale forward process
    keeps every value on the diagonal up to Monte-Carlo noise; a drifting one
    walks away from it.

    Returns rows {"k", "initial_u", "mean_refit_u"}, always including k = 0.
    """
    if not source.can_forward:
        raise ValueError(
            f"{type(source).__name__} has no forward_refit capability; "
            "the diagnostic needs a source that can absorb one observation at a time"
        )
    probe_quantiles = np.asarray(probe_quantiles, dtype=float)
    init = source.ppd_at(None)
    probe_ys = np.array([init.quantile(q) for q in probe_quantiles])
    cps = [0] + [c for c in (checkpoints or decade_checkpoints(n_steps)) if c <= n_steps] if n_steps > 0 else [0]
    cps = sorted(set(cps))
    acc = {k: np.zeros(probe_ys.size) for k in cps}
    for r in range(replicates):
        gen = rng.stream(seed, rng.TAG_DIAGNOSTIC + r)
        cur = source
        if 0 in acc:
            acc[0] += interp_cdf_rows(
                init.grid, np.broadcast_to(init.cdf, (probe_ys.size, init.cdf.size)), probe_ys
            )
        for k in range(1, n_steps + 1):
            u = min(max(gen.random(), DRAW_EPS), 1.0 - DRAW_EPS)
            y = cur.ppd_at(None).sample(u)
            cur = cur.forward_refit(y)
            if k in acc:
                d = cur.ppd_at(None)
                acc[k] += interp_cdf_rows(
                    d.grid, np.broadcast_to(d.cdf, (probe_ys.size, d.cdf.size)), probe_ys
                )
    rows = []
    for k in cps:
        means = acc[k] / replicates
        for q, mu in zip(probe_quantiles, means):
            rows.append({"k": k, "initial_u": float(q), "mean_refit_u": float(mu)})
    return rows
