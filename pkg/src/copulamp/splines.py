"""Conjugate Bayesian additive spline regression with closed-form posterior.

The model is y = sum_j f_j(x_j) + noise with f_j(x) = b(x)' theta_j, a
clamped cubic B-spline basis per feature, standard-normal prior on all
coefficients and known noise variance.  Gaussian prior + Gaussian likelihood
make the coefficient posterior available in closed form, so credible
intervals for any f_j(x) are exact.  Serves as the calibration reference
for the resampling-based posteriors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtri

from .sources import Dataset

__all__ = [
    "SplineModelSpec",
    "SplineClampWarning",
    "make_knots",
    "bspline_basis",
    "design_matrix",
    "conjugate_posterior",
    "OptimalModel",
    "optimal_ci",
]


class SplineClampWarning(UserWarning):
    """An evaluation point fell outside the knot range and was clamped."""


def make_knots(lo: float, hi: float, basis_size: int, degree: int) -> np.ndarray:
    """Clamped, equally spaced knot vector supporting ``basis_size`` functions."""
    if basis_size < degree + 1:
        raise ValueError(f"basis_size must be >= degree + 1, got {basis_size} < {degree + 1}")
    if not hi > lo:
        raise ValueError(f"empty knot range [{lo}, {hi}]")
    interior = np.linspace(lo, hi, basis_size - degree + 1)
    return np.concatenate([np.full(degree, lo), interior, np.full(degree, hi)])


def bspline_basis(x: float, knots: np.ndarray, degree: int) -> np.ndarray:
    """All B-spline basis values at x by the triangular recursion.

    Entries are nonnegative and sum to one inside the clamped range.  Points
    outside the range are clamped to the boundary with a SplineClampWarning.
    """
    knots = np.asarray(knots, dtype=float)
    nb = knots.size - degree - 1
    lo, hi = knots[degree], knots[nb]
    x = float(x)
    if x < lo or x > hi:
        warnings.warn(
            f"evaluation point {x:g} outside knot range [{lo:g}, {hi:g}]; clamped",
            SplineClampWarning,
            stacklevel=2,
        )
        x = min(max(x, lo), hi)

    # Locate the knot span [knots[j], knots[j+1]) containing x; the right
    # boundary belongs to the last span.
    if x >= hi:
        j = nb - 1
    else:
        j = int(np.searchsorted(knots, x, side="right")) - 1
        j = min(max(j, degree), nb - 1)

    # de Boor's algorithm: values of the degree+1 basis functions that are
    # nonzero on span j.
    vals = np.zeros(degree + 1)
    vals[0] = 1.0
    for p in range(1, degree + 1):
        saved = 0.0
        for r in range(p):
            left = x - knots[j - p + 1 + r]
            right = knots[j + 1 + r] - x
            denom = knots[j + 1 + r] - knots[j - p + 1 + r]
            term = vals[r] / denom if denom > 0 else 0.0
            vals[r] = saved + right * term
            saved = left * term
        vals[p] = saved
    out = np.zeros(nb)
    out[j - degree : j + 1] = vals
    return out


def design_matrix(x_cols: np.ndarray, knots_list: list[np.ndarray], degree: int) -> np.ndarray:
    """Stack per-feature bases into the (n, J * basis_size) regression design."""
    x_cols = np.atleast_2d(x_cols)
    n, j_count = x_cols.shape
    sizes = [k.size - degree - 1 for k in knots_list]
    out = np.zeros((n, sum(sizes)))
    col = 0
    for j in range(j_count):
        for i in range(n):
            out[i, col : col + sizes[j]] = bspline_basis(x_cols[i, j], knots_list[j], degree)
        col += sizes[j]
    return out


def conjugate_posterior(
    design: np.ndarray, y: np.ndarray, sigma2: float, prior_var: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance under N(0, prior_var I) prior, known noise.

    covariance = (X'X / sigma2 + I / prior_var)^-1, mean = covariance X'y
    / sigma2, solved through a Cholesky factorization (the ridge keeps it
    SPD).  The model's prior is the unit normal; prior_var exists for
    sensitivity checks.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise ValueError("design must be a 2-D matrix")
    p = design.shape[1]
    if design.shape[0] == 0:
        return np.zeros(p), prior_var * np.eye(p)
    if not np.all(np.isfinite(design)):
        raise ValueError("design contains non-finite values")
    precision = design.T @ design / sigma2 + np.eye(p) / prior_var
    factor = cho_factor(precision, lower=True)
    cov = cho_solve(factor, np.eye(p))
    cov = 0.5 * (cov + cov.T)
    mean = cov @ (design.T @ np.asarray(y, dtype=float) / sigma2)
    return mean, cov


@dataclass
class SplineModelSpec:
    """Shape of the additive spline model."""

    basis_size: int = 20
    degree: int = 3
    sigma2: float = 0.5
    knot_ranges: list[tuple[float, float]] | None = field(default=None)

    def __post_init__(self):
        if self.basis_size < self.degree + 1:
            raise ValueError("basis_size must be at least degree + 1")
        if self.sigma2 <= 0:
            raise ValueError("noise variance sigma2 must be positive")


class OptimalModel:
    """Fitted conjugate additive spline model with exact credible intervals."""

    def __init__(self, spec: SplineModelSpec | None = None):
        self.spec = spec or SplineModelSpec()
        self.knots: list[np.ndarray] | None = None
        self.mean: np.ndarray | None = None
        self.cov: np.ndarray | None = None

    def fit(self, dataset: Dataset) -> "OptimalModel":
        spec = self.spec
        ranges = spec.knot_ranges
        if ranges is None:
            ranges = [(float(c.min()), float(c.max())) for c in dataset.x.T]
        if len(ranges) != dataset.d:
            raise ValueError(f"{len(ranges)} knot ranges for {dataset.d} features")
        self.knots = [make_knots(lo, hi, spec.basis_size, spec.degree) for lo, hi in ranges]
        design = design_matrix(dataset.x, self.knots, spec.degree)
        self.mean, self.cov = conjugate_posterior(design, dataset.y, spec.sigma2)
        return self

    def _check_fitted(self):
        if self.mean is None:
            raise RuntimeError("model not fitted; call fit(dataset) first")

    def component_posterior(self, feature: int, x_value: float) -> tuple[float, float]:
        """Posterior mean and variance of f_feature(x_value)."""
        self._check_fitted()
        bs = self.spec.basis_size
        sl = slice(feature * bs, (feature + 1) * bs)
        b = bspline_basis(x_value, self.knots[feature], self.spec.degree)
        mu = float(b @ self.mean[sl])
        var = float(b @ self.cov[sl, sl] @ b)
        return mu, max(var, 0.0)

    def component_ci(self, feature: int, x_value: float, level: float) -> tuple[float, float]:
        """Equal-tailed Gaussian credible interval for f_feature(x_value)."""
        if not 0.0 <= level < 1.0:
            raise ValueError(f"level must lie in [0, 1), got {level}")
        mu, var = self.component_posterior(feature, x_value)
        if level == 0.0:
            return mu, mu
        z = float(ndtri(0.5 * (1.0 + level)))
        half = z * np.sqrt(var)
        return mu - half, mu + half


def optimal_ci(
    model: OptimalModel, feature: int, x_value: float, level: float
) -> tuple[float, float]:
    return model.component_ci(feature, x_value, level)
