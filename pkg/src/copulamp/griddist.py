"""Discretized one-dimensional distributions.

Two representations live here:

* :class:`GridDistribution` -- a CDF tabulated on a strictly increasing grid,
  evaluated by monotone piecewise-linear interpolation.  This is the state
  the predictive-resampling engine updates, and the on-disk PPD format.
* :class:`EmpiricalCdf` -- the right-continuous step CDF of a finite sample,
  used when summarizing forward-sampled chains.

Both expose the same functional surface (``mean`` / ``variance`` /
``quantile`` / ``cdf``) so a :class:`FunctionalSpec` can be evaluated against
either.  Instances are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .normal import UNIT_EPS, clamp_unit

__all__ = [
    "GridDistribution",
    "EmpiricalCdf",
    "FunctionalSpec",
    "GridDistributionError",
    "PpdSchemaError",
    "cdf_at",
    "quantile_at",
    "sample",
    "mean_of",
    "variance_of",
    "empirical_from_samples",
    "default_grid",
    "tabulate_cdf",
    "load_ppd_json",
    "save_ppd_json",
]

DEFAULT_GRID_SIZE = 1024
MIN_GRID_SIZE = 16
EDGE_TOL = 1e-6
PDF_MASS_BAND = (0.99, 1.01)


class GridDistributionError(ValueError):
    """A constructed distribution violates a type invariant."""


class PpdSchemaError(ValueError):
    """A PPD file does not match the versioned JSON schema."""


# ---------------------------------------------------------------------------
# array-level kernels (shared by the object API and the batched engine)
# ---------------------------------------------------------------------------

def interp_rows(grid: np.ndarray, value_rows: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Piecewise-linear evaluation of row-stacked grid functions, one query per row.

    ``value_rows`` has shape (M, G) and ``ys`` shape (M,); the grid is shared.
    Queries below/above the grid saturate to the edge values.
    """
    ys = np.asarray(ys, dtype=float)
    value_rows = np.atleast_2d(value_rows)
    m = value_rows.shape[0]
    idx = np.searchsorted(grid, ys, side="right")
    idx = np.clip(idx, 1, grid.size - 1)
    g0 = grid[idx - 1]
    g1 = grid[idx]
    rows = np.arange(m)
    c0 = value_rows[rows, idx - 1]
    c1 = value_rows[rows, idx]
    t = np.clip((ys - g0) / (g1 - g0), 0.0, 1.0)
    return c0 + t * (c1 - c0)


def interp_cdf_rows(grid: np.ndarray, cdf_rows: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """CDF evaluation per row, clamped into [UNIT_EPS, 1 - UNIT_EPS].

    The clamp is the single choke point guarding every downstream
    normal-quantile call against the 0/1 singularities.
    """
    return clamp_unit(interp_rows(grid, cdf_rows, ys))


def quantile_on_grid(grid: np.ndarray, cdf: np.ndarray, u: float) -> float:
    """Generalized inverse of a tabulated CDF with linear interpolation.

    Flat stretches resolve to the leftmost grid value achieving cdf >= u;
    u outside the tabulated CDF range saturates to the grid edges.
    """
    j = int(np.searchsorted(cdf, u, side="left"))
    if j <= 0:
        return float(grid[0])
    if j >= grid.size:
        return float(grid[-1])
    c0 = cdf[j - 1]
    c1 = cdf[j]
    t = (u - c0) / (c1 - c0)
    return float(grid[j - 1] + t * (grid[j] - grid[j - 1]))


# ---------------------------------------------------------------------------
# grid-backed distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridDistribution:
    """A one-dimensional distribution as monotone CDF values on a grid.

    Parameters
    ----------
    grid : (G,) strictly increasing label values, G >= 16.
    cdf : (G,) nondecreasing probabilities with cdf[0] <= 1e-6 and
        cdf[-1] >= 1 - 1e-6.
    pdf : optional (G,) nonnegative densities whose trapezoid integral over
        the grid lies in [0.99, 1.01].
    meta : free-form metadata; by convention carries ``n_train`` and the
        feature vector ``x`` the distribution conditions on.
    """

    grid: np.ndarray
    cdf: np.ndarray
    pdf: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=float)
        cdf = np.ascontiguousarray(self.cdf, dtype=float)
        pdf = None if self.pdf is None else np.ascontiguousarray(self.pdf, dtype=float)
        for name, arr in (("grid", grid), ("cdf", cdf), ("pdf", pdf)):
            if arr is not None:
                arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "cdf", cdf)
        object.__setattr__(self, "pdf", pdf)
        self.validate()

    def validate(self) -> None:
        """Raise GridDistributionError naming the first violated invariant."""
        g, c, p = self.grid, self.cdf, self.pdf
        if g.ndim != 1 or g.size < MIN_GRID_SIZE:
            raise GridDistributionError(
                f"grid must be one-dimensional with at least {MIN_GRID_SIZE} points, got shape {g.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise GridDistributionError("grid contains non-finite values")
        steps = np.diff(g)
        if np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0))
            raise GridDistributionError(
                f"grid not strictly increasing at indices {bad} -> {bad + 1}"
            )
        if c.shape != g.shape:
            raise GridDistributionError(
                f"cdf shape {c.shape} does not match grid shape {g.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise GridDistributionError("cdf contains non-finite values")
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise GridDistributionError("cdf values outside [0, 1]")
        dec = np.diff(c) < 0
        if np.any(dec):
            bad = int(np.argmax(dec))
            raise GridDistributionError(
                f"cdf decreasing at indices {bad} -> {bad + 1}"
            )
        if c[0] > EDGE_TOL:
            raise GridDistributionError(
                f"cdf[0] = {c[0]:.3g} exceeds left-edge tolerance {EDGE_TOL}"
            )
        if c[-1] < 1.0 - EDGE_TOL:
            raise GridDistributionError(
                f"cdf[-1] = {c[-1]:.9g} below right-edge tolerance 1 - {EDGE_TOL}"
            )
        if p is not None:
            if p.shape != g.shape:
                raise GridDistributionError(
                    f"pdf shape {p.shape} does not match grid shape {g.shape}"
                )
            if not np.all(np.isfinite(p)):
                raise GridDistributionError("pdf contains non-finite values")
            if np.any(p < 0.0):
                bad = int(np.argmax(p < 0.0))
                raise GridDistributionError(f"pdf negative at index {bad}")
            mass = float(np.trapezoid(p, g))
            if not PDF_MASS_BAND[0] <= mass <= PDF_MASS_BAND[1]:
                raise GridDistributionError(
                    f"pdf trapezoid mass {mass:.6f} outside {PDF_MASS_BAND}"
                )

    # -- evaluation ---------------------------------------------------------

    def cdf_at(self, y: float) -> float:
        """CDF at y by linear interpolation, clamped into [1e-10, 1 - 1e-10]."""
        y = float(y)
        if not np.isfinite(y):
            raise ValueError("cdf_at requires finite y")
        return float(interp_cdf_rows(self.grid, self.cdf[None, :], np.array([y]))[0])

    def quantile(self, u: float) -> float:
        u = float(u)
        if not 0.0 < u < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {u}")
        return quantile_on_grid(self.grid, self.cdf, u)

    def sample(self, uniform_draw: float) -> float:
        """Inverse-CDF sampling: deterministic given the uniform draw."""
        return self.quantile(uniform_draw)

    def mean(self) -> float:
        mids = 0.5 * (self.grid[1:] + self.grid[:-1])
        dp = np.diff(self.cdf)
        return float(mids @ dp)

    def variance(self) -> float:
        mids = 0.5 * (self.grid[1:] + self.grid[:-1])
        dp = np.diff(self.cdf)
        m = float(mids @ dp)
        second = float((mids * mids) @ dp)
        return max(second - m * m, 0.0)

    def pdf_at(self, y: float) -> float:
        """Linear interpolation of the tracked density (requires pdf)."""
        if self.pdf is None:
            raise ValueError(
                "distribution carries no pdf; supply one or derive it from the cdf"
            )
        return float(np.interp(float(y), self.grid, self.pdf))

    def with_pdf_from_cdf(self) -> "GridDistribution":
        """Derive a density by central finite differences of the CDF, floored at 0."""
        if self.pdf is not None:
            return self
        p = np.maximum(np.gradient(self.cdf, self.grid), 0.0)
        return GridDistribution(self.grid, self.cdf, p, dict(self.meta))


# ---------------------------------------------------------------------------
# empirical step CDF
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical CDF of a finite sample (step semantics)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.ascontiguousarray(self.samples, dtype=float))
        if s.size < 1:
            raise ValueError("empirical CDF requires at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("empirical CDF requires finite samples")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def cdf_at(self, y: float) -> float:
        n = self.samples.size
        return float(np.searchsorted(self.samples, float(y), side="right")) / n

    def quantile(self, u: float) -> float:
        u = float(u)
        if not 0.0 < u < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {u}")
        n = self.samples.size
        levels = np.arange(1, n + 1) / n
        k = int(np.searchsorted(levels, u, side="left"))
        return float(self.samples[min(k, n - 1)])

    def sample(self, uniform_draw: float) -> float:
        return self.quantile(uniform_draw)

    def mean(self) -> float:
        return float(np.mean(self.samples))

    def variance(self) -> float:
        return float(np.var(self.samples))


def empirical_from_samples(samples) -> EmpiricalCdf:
    """Empirical CDF of the given samples, evaluated with step semantics."""
    return EmpiricalCdf(np.asarray(samples, dtype=float))


# ---------------------------------------------------------------------------
# module-level functional API (accepts either representation)
# ---------------------------------------------------------------------------

def cdf_at(dist, y: float) -> float:
    return dist.cdf_at(y)


def quantile_at(dist, u: float) -> float:
    return dist.quantile(u)


def sample(dist, uniform_draw: float) -> float:
    return dist.sample(uniform_draw)


def mean_of(dist) -> float:
    return dist.mean()


def variance_of(dist) -> float:
    return dist.variance()


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalSpec:
    """A scalar summary of a conditional distribution.

    ``kind`` is one of mean, variance, quantile (with level in (0, 1)) and
    cdf (with the evaluation point).  The string forms are ``"mean"``,
    ``"variance"``, ``"quantile:<level>"`` and ``"cdf:<y>"``.
    """

    kind: str
    param: float | None = None

    _KINDS = ("mean", "variance", "quantile", "cdf")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}; expected one of {self._KINDS}")
        if self.kind in ("quantile", "cdf"):
            if self.param is None:
                raise ValueError(f"functional {self.kind!r} requires a parameter")
            if self.kind == "quantile" and not 0.0 < float(self.param) < 1.0:
                raise ValueError(f"quantile level must lie in (0, 1), got {self.param}")
        elif self.param is not None:
            raise ValueError(f"functional {self.kind!r} takes no parameter")

    @classmethod
    def parse(cls, text: str) -> "FunctionalSpec":
        text = text.strip()
        if ":" in text:
            kind, raw = text.split(":", 1)
            return cls(kind.strip(), float(raw))
        return cls(text)

    def __str__(self) -> str:
        if self.param is None:
            return self.kind
        return f"{self.kind}:{self.param:g}"

    def evaluate(self, dist) -> float:
        if self.kind == "mean":
            return dist.mean()
        if self.kind == "variance":
            return dist.variance()
        if self.kind == "quantile":
            return dist.quantile(self.param)
        return dist.cdf_at(self.param)


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def default_grid(quantile_fn: Callable[[float], float], size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Equally spaced grid covering the central mass plus half an IQR of slack.

    Spans [q(1e-4) - 0.5 IQR, q(1 - 1e-4) + 0.5 IQR] of the supplied quantile
    function so that forward samples have room to move into the tails.
    """
    lo = float(quantile_fn(1e-4))
    hi = float(quantile_fn(1.0 - 1e-4))
    iqr = float(quantile_fn(0.75)) - float(quantile_fn(0.25))
    pad = 0.5 * iqr
    if hi - lo + 2 * pad <= 0:
        raise ValueError("degenerate quantile function: grid span would be empty")
    return np.linspace(lo - pad, hi + pad, size)


def tabulate_cdf(
    grid: np.ndarray,
    cdf_values: np.ndarray,
    pdf_values: np.ndarray | None = None,
    meta: dict | None = None,
) -> GridDistribution:
    """Build a GridDistribution from raw CDF values, renormalized to the grid span.

    The CDF is rescaled so the tabulated range carries exactly unit mass
    (truncation to the grid); the pdf, when given, is rescaled by the same
    factor.  This keeps the edge invariants exact for parametric tails.
    """
    grid = np.asarray(grid, dtype=float)
    c = np.asarray(cdf_values, dtype=float)
    span = c[-1] - c[0]
    if span <= 0:
        raise ValueError("cdf values carry no mass over the grid")
    c = (c - c[0]) / span
    p = None
    if pdf_values is not None:
        p = np.maximum(np.asarray(pdf_values, dtype=float) / span, 0.0)
    return GridDistribution(grid, c, p, meta or {})


# ---------------------------------------------------------------------------
# versioned JSON schema
# ---------------------------------------------------------------------------

SCHEMA_VERSION = 1


def _require(payload: dict, key: str):
    if key not in payload:
        raise PpdSchemaError(f"missing required key {key!r}")
    return payload[key]


def from_payload(payload: dict) -> GridDistribution:
    """Parse a schema-v1 payload, naming the failed invariant on rejection."""
    if not isinstance(payload, dict):
        raise PpdSchemaError("payload must be a JSON object")
    version = _require(payload, "version")
    if version != SCHEMA_VERSION:
        raise PpdSchemaError(f"unsupported schema version {version!r}; expected {SCHEMA_VERSION}")
    x = _require(payload, "x")
    n_train = _require(payload, "n_train")
    grid = _require(payload, "grid")
    cdf = _require(payload, "cdf")
    if not isinstance(x, list) or not all(isinstance(v, (int, float)) for v in x):
        raise PpdSchemaError("'x' must be a list of reals")
    if not isinstance(n_train, int) or n_train < 0:
        raise PpdSchemaError("'n_train' must be a nonnegative integer")
    pdf = payload.get("pdf")
    meta = dict(payload.get("meta", {}))
    meta["x"] = [float(v) for v in x]
    meta["n_train"] = n_train
    try:
        return GridDistribution(
            np.asarray(grid, dtype=float),
            np.asarray(cdf, dtype=float),
            None if pdf is None else np.asarray(pdf, dtype=float),
            meta,
        )
    except GridDistributionError as err:
        raise PpdSchemaError(f"invariant violation: {err}") from err


def to_payload(dist: GridDistribution) -> dict:
    meta = dict(dist.meta)
    x = meta.pop("x", [])
    n_train = meta.pop("n_train", 0)
    payload = {
        "version": SCHEMA_VERSION,
        "x": [float(v) for v in np.atleast_1d(x)],
        "n_train": int(n_train),
        "grid": dist.grid.tolist(),
        "cdf": dist.cdf.tolist(),
        "meta": meta,
    }
    if dist.pdf is not None:
        payload["pdf"] = dist.pdf.tolist()
    return payload


def load_ppd_json(path) -> GridDistribution:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as err:
            raise PpdSchemaError(f"not valid JSON: {err}") from err
    return from_payload(payload)


def save_ppd_json(dist: GridDistribution, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_payload(dist), fh, sort_keys=True)
        fh.write("\n")
