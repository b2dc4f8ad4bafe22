"""Standard-normal CDF/quantile and the bivariate Gaussian copula kernels.

Everything here is a pure function of its arguments and safe to call from
any thread.  All functions accept scalars or numpy arrays and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "CopulaBandwidth",
    "std_normal_cdf",
    "std_normal_quantile",
    "copula_conditional_cdf",
    "copula_density",
]

# Callers feed CDF values into the normal quantile; grid edges can hit 0/1
# exactly, so those entry points clamp to this band first.
UNIT_EPS = 1e-10


@dataclass(frozen=True)
class CopulaBandwidth:
    """Smoothing bandwidth of the Gaussian copula update, strictly inside (0, 1).

    Boundary values are rejected: rho = 0 makes the update a no-op and
    rho = 1 degenerates the conditional CDF to a step function.
    """

    rho: float

    def __post_init__(self):
        rho = float(self.rho)
        if not np.isfinite(rho) or not 0.0 < rho < 1.0:
            raise ValueError(f"bandwidth rho must lie in the open interval (0, 1), got {self.rho!r}")
        object.__setattr__(self, "rho", rho)


def _as_rho(rho) -> float:
    if isinstance(rho, CopulaBandwidth):
        return rho.rho
    return CopulaBandwidth(rho).rho


def clamp_unit(p):
    """Clamp probabilities into [UNIT_EPS, 1 - UNIT_EPS] before quantile calls."""
    return np.clip(p, UNIT_EPS, 1.0 - UNIT_EPS)


def std_normal_cdf(z):
    """Standard normal CDF, accurate to well below 1e-12 absolute error."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("std_normal_cdf requires finite input")
    out = ndtr(z)
    return float(out) if out.ndim == 0 else out


def std_normal_quantile(u):
    """Inverse of the standard normal CDF on the open interval (0, 1)."""
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0.0) & (u < 1.0)):
        raise ValueError("std_normal_quantile requires 0 < u < 1; clamp first")
    out = ndtri(u)
    return float(out) if out.ndim == 0 else out


def copula_conditional_cdf(u, v, rho):
    """Conditional CDF of the bivariate Gaussian copula, P(U <= u | V = v).

    Evaluates Phi((Phi^-1(u) - rho * Phi^-1(v)) / sqrt(1 - rho^2)).  Strictly
    increasing in u for fixed (v, rho); averaging over v ~ Uniform(0, 1)
    returns u, which is what makes the CDF update a martingale.
    """
    r = _as_rho(rho)
    zu = std_normal_quantile(u)
    zv = std_normal_quantile(v)
    w = (zu - r * zv) / np.sqrt(1.0 - r * r)
    out = ndtr(w)
    return float(out) if np.ndim(out) == 0 else out


def copula_density(u, v, rho):
    """Density of the bivariate Gaussian copula on the unit square.

    c(u, v) = exp(-(rho^2 (zu^2 + zv^2) - 2 rho zu zv) / (2 (1 - rho^2)))
              / sqrt(1 - rho^2)   with  z. = Phi^-1(.).

    Symmetric in (u, v); integrates to 1 in each argument.
    """
    r = _as_rho(rho)
    zu = std_normal_quantile(u)
    zv = std_normal_quantile(v)
    s2 = 1.0 - r * r
    expo = -(r * r * (zu * zu + zv * zv) - 2.0 * r * zu * zv) / (2.0 * s2)
    out = np.exp(expo) / np.sqrt(s2)
    return float(out) if np.ndim(out) == 0 else out
