"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm, t as student_t

from copulamp import rng as crng
from copulamp.engine import update_rows
from copulamp.griddist import GridDistribution, default_grid, tabulate_cdf


def tabulated_normal(mean=0.0, sd=1.0, size=1024, meta=None) -> GridDistribution:
    g = default_grid(lambda q: norm.ppf(q, mean, sd), size)
    return tabulate_cdf(g, norm.cdf(g, mean, sd), norm.pdf(g, mean, sd), meta or {})


def tabulated_t(df=3, size=1024, meta=None) -> GridDistribution:
    g = default_grid(lambda q: student_t.ppf(q, df), size)
    return tabulate_cdf(g, student_t.cdf(g, df), student_t.pdf(g, df), meta or {})


def conjugate_normal_predictive(ys: np.ndarray, grid_size=1024) -> GridDistribution:
    """Exact posterior predictive of the unit-variance normal model with N(0,1) mean prior."""
    n = ys.size
    m = n * float(np.mean(ys)) / (n + 1)
    sd = float(np.sqrt(1.0 + 1.0 / (n + 1)))
    g = default_grid(lambda q: norm.ppf(q, m, sd), grid_size)
    return tabulate_cdf(
        g, norm.cdf(g, m, sd), norm.pdf(g, m, sd), {"x": [0.0], "n_train": int(n)}
    )


def mc_martingale_sup_deviation(
    P0: GridDistribution, alpha_k: float, rho: float, n_draws: int, seed: int = 0
) -> float:
    """Monte-Carlo oracle for the one-step martingale property.

    Draw y ~ P0 many times, average the updated CDF, and return the sup-norm
    distance from the original CDF.  The update is mean-preserving, so this
    should vanish at the 1/sqrt(n_draws) rate.
    """
    from copulamp.engine import quantile_rows

    gen = crng.stream(seed, 0)
    grid, cdf = P0.grid, P0.cdf
    acc = np.zeros(cdf.size)
    chunk = 2000
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        us = np.clip(gen.random(m), 1e-12, 1 - 1e-12)
        ys = quantile_rows(grid, np.broadcast_to(cdf, (m, cdf.size)), us)
        new_rows, _ = update_rows(grid, np.broadcast_to(cdf, (m, cdf.size)), None, ys, alpha_k, rho)
        acc += new_rows.sum(axis=0)
        done += m
    avg = acc / n_draws
    return float(np.max(np.abs(avg - cdf)))
