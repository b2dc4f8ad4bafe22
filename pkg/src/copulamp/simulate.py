"""Synthetic data generators for the benchmark experiments.

All generators are pure functions of their parameters and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .splines import bspline_basis, make_knots
from .sources import Dataset

__all__ = [
    "SplineTruth",
    "gen_additive_spline",
    "gen_funnel",
    "gen_diffusion",
    "gen_gamma_iid",
]

SPLINE_X_RANGE = (-2.5, 2.5)


@dataclass(frozen=True)
class SplineTruth:
    """Ground truth behind an additive-spline dataset."""

    theta: np.ndarray  # (J, basis_size) coefficients, zero rows for noise features
    knots: np.ndarray
    degree: int
    sigma2: float

    def f(self, feature: int, x_value: float) -> float:
        """True component function f_feature at x_value."""
        return float(bspline_basis(x_value, self.knots, self.degree) @ self.theta[feature])

    def conditional_mean(self, x_row) -> float:
        x_row = np.atleast_1d(x_row)
        return float(sum(self.f(j, x_row[j]) for j in range(self.theta.shape[0])))

    def conditional_quantile(self, x_row, level: float) -> float:
        from scipy.special import ndtri

        return self.conditional_mean(x_row) + float(ndtri(level)) * np.sqrt(self.sigma2)


def gen_additive_spline(
    n: int,
    J: int = 30,
    signal_count: int = 1,
    sigma2: float = 0.5,
    seed: int = 0,
    basis_size: int = 20,
    degree: int = 3,
) -> tuple[Dataset, SplineTruth]:
    """Additive spline model with J features of which signal_count carry signal.

    Features are uniform on [-2.5, 2.5]; signal coefficients are standard
    normal, noise features contribute nothing.  The returned truth object
    evaluates the generating component functions for coverage scoring.
    """
    if not 0 <= signal_count <= J:
        raise ValueError("signal_count must lie in [0, J]")
    gen = rng.stream(seed, 0)
    lo, hi = SPLINE_X_RANGE
    x = gen.uniform(lo, hi, size=(n, J))
    knots = make_knots(lo, hi, basis_size, degree)
    theta = np.zeros((J, basis_size))
    theta[:signal_count] = gen.standard_normal((signal_count, basis_size))
    mean = np.zeros(n)
    for j in range(signal_count):
        mean += np.array([bspline_basis(v, knots, degree) @ theta[j] for v in x[:, j]])
    y = mean + np.sqrt(sigma2) * gen.standard_normal(n)
    return Dataset(y, x), SplineTruth(theta, knots, degree, sigma2)


def gen_funnel(n: int, seed: int = 0) -> Dataset:
    """Heteroscedastic Gaussian funnel: x ~ U(0,1), y ~ N(sin(3x), x^2)."""
    gen = rng.stream(seed, 0)
    x = gen.uniform(0.0, 1.0, size=n)
    y = np.sin(3.0 * x) + x * gen.standard_normal(n)
    return Dataset(y, x[:, None])


def funnel_quantile(x_value: float, level: float) -> float:
    """Closed-form conditional quantile of the funnel law."""
    from scipy.special import ndtri

    return float(np.sin(3.0 * x_value) + x_value * ndtri(level))


def gen_diffusion(n: int = 200, seed: int = 0, return_details: bool = False):
    """Branching diffusion-style regression data.

    Inputs are uniform on [2.5, 12.5]; each sample follows one of three branch
    functions that switch behavior at a data-dependent midpoint, plus noise
    whose scale grows quadratically in x.  Inputs are centered to [-2.5, 2.5]
    and outputs min-max normalized to [0, 1].

    With ``return_details`` the raw signal/branch assignment comes along for
    diagnostics (the normalization hides them otherwise).
    """
    gen = rng.stream(seed, 0)
    x = gen.uniform(2.5, 12.5, size=n)
    m = float(np.median(x)) - 2.0
    branch = gen.integers(0, 3, size=n)

    f1 = np.where(x < m, 0.4 * x, np.sin(2.0 * x))
    f2 = -f1
    f3 = np.where(x < m, 0.5, 0.5 + 0.1 * np.sin(8.0 * x))
    signal = np.choose(branch, [f1, f2, f3])
    noise_sd = 0.02 * x**2
    y = signal + noise_sd * gen.standard_normal(n)

    x_centered = (x - 7.5) / 2.0  # [2.5, 12.5] -> [-2.5, 2.5]
    y_span = y.max() - y.min()
    y_norm = (y - y.min()) / (y_span if y_span > 0 else 1.0)
    ds = Dataset(y_norm, x_centered[:, None])
    if return_details:
        return ds, {"x_raw": x, "branch": branch, "signal": signal, "y_raw": y}
    return ds


def gen_gamma_iid(n: int = 25, shape: float = 2.0, scale: float = 2.0, seed: int = 0) -> np.ndarray:
    """iid gamma draws (unconditional fixture for drift diagnostics)."""
    gen = rng.stream(seed, 0)
    return gen.gamma(shape, scale, size=n)
