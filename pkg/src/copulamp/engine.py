"""Predictive-resampling engine.

One chain starts from an initial predictive CDF on a grid and alternates
two moves: draw a pseudo-observation from the current CDF by inverse
transform, then revise every grid node by the Gaussian-copula update

    P_k(y) = (1 - a_k) P_{k-1}(y) + a_k H_rho(P_{k-1}(y), P_{k-1}(y_k)),

where a_k is the learning rate at step n_train + k.  The node-wise update
keeps E[P_k(y) | P_{k-1}] = P_{k-1}(y), so the chain's limit is a valid
posterior draw for any functional of the predictive law.

Chains are independent work units: chain b draws from a counter-based
stream keyed (seed, b), blocks of chains advance together as row-stacked
matrices, and summaries fold results in chain-id order.  Output is
bit-identical for any thread count.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng
from .griddist import (
    EmpiricalCdf,
    FunctionalSpec,
    GridDistribution,
    GridDistributionError,
    interp_cdf_rows,
)
from .normal import CopulaBandwidth, clamp_unit
from .schedules import ScheduleSpec, alpha

__all__ = [
    "EngineConfig",
    "ChainResult",
    "FunctionalSummary",
    "PosteriorResult",
    "EngineError",
    "copula_update",
    "run_chain",
    "run_posterior",
    "contraction_probe",
    "decade_checkpoints",
    "quantile_rows",
    "update_rows",
    "update_rows_at_levels",
]

# Uniform draws are kept this far from {0, 1}; beyond-grid inverse-CDF
# queries saturate anyway, and extreme copula scores destabilize the tails.
DRAW_EPS = 1e-7


class EngineError(RuntimeError):
    """An update produced a state violating the distribution invariants."""


# ---------------------------------------------------------------------------
# row-batched kernels
# ---------------------------------------------------------------------------

def quantile_rows(grid: np.ndarray, cdf_rows: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Generalized-inverse sampling, one level per row of a (M, G) CDF stack.

    Matches griddist.quantile_on_grid exactly: leftmost node attaining
    cdf >= u, linear interpolation inside the bracketing cell, saturation
    at the grid edges.
    """
    cdf_rows = np.atleast_2d(cdf_rows)
    us = np.asarray(us, dtype=float)
    m, g = cdf_rows.shape
    r = np.arange(m)
    lo = np.zeros(m, dtype=np.int64)
    hi = np.full(m, g, dtype=np.int64)
    for _ in range(int(g).bit_length()):
        active = lo < hi
        mid = (lo + hi) >> 1
        less = cdf_rows[r, np.minimum(mid, g - 1)] < us
        lo = np.where(active & less, mid + 1, lo)
        hi = np.where(active & ~less, mid, hi)
    j = lo
    inner = (j > 0) & (j < g)
    ji = np.clip(j, 1, g - 1)
    c0 = cdf_rows[r, ji - 1]
    c1 = cdf_rows[r, ji]
    t = (us - c0) / (c1 - c0)
    interp = grid[ji - 1] + t * (grid[ji] - grid[ji - 1])
    out = np.where(j <= 0, grid[0], np.where(j >= g, grid[-1], np.where(inner, interp, grid[-1])))
    return out


def update_rows_at_levels(
    cdf_rows: np.ndarray,
    pdf_rows: np.ndarray | None,
    vs,
    alphas,
    rho: float,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Copula-update row-stacked CDFs against observation probability levels.

    ``vs`` (scalar or per-row) are the observations' CDF values, already in
    (0, 1); ``alphas`` is a scalar or per-row vector of update weights.
    Returns the new CDF rows (and density rows when tracked).  A cumulative
    max absorbs sub-ulp monotonicity wiggle from the quantile evaluations.
    """
    cdf_rows = np.atleast_2d(cdf_rows)
    a = np.asarray(alphas, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    vs = np.asarray(vs, dtype=float)
    u = clamp_unit(cdf_rows)
    zu = ndtri(u)
    zv = ndtri(vs)
    if zv.ndim == 1:
        zv = zv[:, None]
    s2 = 1.0 - rho * rho
    h = ndtr((zu - rho * zv) / np.sqrt(s2))
    new_cdf = (1.0 - a) * cdf_rows + a * h
    np.maximum.accumulate(new_cdf, axis=1, out=new_cdf)
    np.clip(new_cdf, 0.0, 1.0, out=new_cdf)
    new_pdf = None
    if pdf_rows is not None:
        dens = np.exp(-(rho * rho * (zu * zu + zv * zv) - 2.0 * rho * zu * zv) / (2.0 * s2))
        dens /= np.sqrt(s2)
        new_pdf = pdf_rows * ((1.0 - a) + a * dens)
    return new_cdf, new_pdf


def update_rows(
    grid: np.ndarray,
    cdf_rows: np.ndarray,
    pdf_rows: np.ndarray | None,
    ys: np.ndarray,
    alphas,
    rho: float,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Copula-update every row toward its own observation value."""
    cdf_rows = np.atleast_2d(cdf_rows)
    vs = interp_cdf_rows(grid, cdf_rows, np.asarray(ys, dtype=float))
    return update_rows_at_levels(cdf_rows, pdf_rows, vs, alphas, rho)


# ---------------------------------------------------------------------------
# configuration and results
# ---------------------------------------------------------------------------

def decade_checkpoints(n: int) -> tuple[int, ...]:
    """1-2-5 decade checkpoints up to and including n."""
    pts = []
    base = 1
    while base <= n:
        for mult in (1, 2, 5):
            v = base * mult
            if v <= n:
                pts.append(v)
        base *= 10
    if not pts or pts[-1] != n:
        pts.append(n)
    return tuple(pts)


@dataclass(frozen=True)
class EngineConfig:
    """Run parameters for the resampling engine.

    n_train is the size of the observed dataset behind the initial PPD; it
    offsets the learning-rate index so step k uses weight alpha(n_train + k).
    """

    B: int
    N: int
    schedule: ScheduleSpec
    rho: CopulaBandwidth
    seed: int
    n_train: int
    functionals: tuple[FunctionalSpec, ...] = (FunctionalSpec("mean"),)
    estimator: str = "empirical"
    checkpoints: tuple[int, ...] | None = None
    level: float = 0.9

    def __post_init__(self):
        if self.B < 1 or self.N < 1:
            raise ValueError("B and N must be >= 1")
        if self.n_train < 0:
            raise ValueError("n_train must be >= 0")
        if self.estimator not in ("empirical", "final_grid"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not 0.0 < self.level < 1.0:
            raise ValueError("credible level must lie in (0, 1)")
        if not isinstance(self.rho, CopulaBandwidth):
            object.__setattr__(self, "rho", CopulaBandwidth(self.rho))
        object.__setattr__(self, "functionals", tuple(self.functionals))
        if self.checkpoints is not None:
            cps = tuple(int(c) for c in self.checkpoints)
            if any(c < 1 or c > self.N for c in cps):
                raise ValueError("checkpoints must lie within [1, N]")
            object.__setattr__(self, "checkpoints", cps)

    def echo(self) -> dict:
        return {
            "B": self.B,
            "N": self.N,
            "schedule": str(self.schedule),
            "rho": self.rho.rho,
            "seed": self.seed,
            "n_train": self.n_train,
            "functionals": [str(f) for f in self.functionals],
            "estimator": self.estimator,
            "checkpoints": list(self.checkpoints) if self.checkpoints else None,
            "level": self.level,
        }


@dataclass
class ChainResult:
    chain_id: int
    samples: np.ndarray
    functional_values: dict
    trace: dict | None = None


@dataclass
class FunctionalSummary:
    """Posterior draws of one functional with equal-tailed interval."""

    draws: np.ndarray
    mean: float
    sd: float
    level: float
    lower: float
    upper: float

    @classmethod
    def from_draws(cls, draws: np.ndarray, level: float) -> "FunctionalSummary":
        draws = np.sort(np.asarray(draws, dtype=float))
        lo, hi = equal_tailed_interval(draws, level)
        sd = float(np.std(draws, ddof=1)) if draws.size > 1 else 0.0
        return cls(draws, float(np.mean(draws)), sd, level, lo, hi)

    def interval(self, level: float | None = None) -> tuple[float, float]:
        if level is None:
            return self.lower, self.upper
        return equal_tailed_interval(self.draws, level)


def equal_tailed_interval(sorted_draws: np.ndarray, level: float) -> tuple[float, float]:
    """Empirical (1-level)/2 and (1+level)/2 quantiles by order statistics."""
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(sorted_draws, [tail, 1.0 - tail], method="inverted_cdf")
    return float(lo), float(hi)


@dataclass
class PosteriorResult:
    functionals: dict
    config: dict
    wall_time_s: float
    traces: list | None = None

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "config": self.config,
            "functionals": {
                name: {
                    "draws": s.draws.tolist(),
                    "mean": s.mean,
                    "sd": s.sd,
                    "interval": {"level": s.level, "lower": s.lower, "upper": s.upper},
                }
                for name, s in self.functionals.items()
            },
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out

    def to_json(self, include_timing: bool = False, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=indent)

    def write_traces_csv(self, path) -> None:
        if self.traces is None:
            raise ValueError("run was configured without checkpoints; no traces recorded")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("chain_id,step,running_mean\n")
            for chain_id, step, rm in self.traces:
                fh.write(f"{chain_id},{step},{rm!r}\n")


# ---------------------------------------------------------------------------
# single-step object API
# ---------------------------------------------------------------------------

def copula_update(
    P_prev: GridDistribution,
    y_new: float,
    alpha_k: float,
    rho: CopulaBandwidth | float,
) -> GridDistribution:
    """One Gaussian-copula revision of a grid CDF toward observation y_new."""
    if not 0.0 < alpha_k < 1.0:
        raise ValueError(f"update weight must lie in (0, 1), got {alpha_k}")
    r = rho.rho if isinstance(rho, CopulaBandwidth) else CopulaBandwidth(rho).rho
    pdf_rows = None if P_prev.pdf is None else P_prev.pdf[None, :]
    new_cdf, new_pdf = update_rows(
        P_prev.grid, P_prev.cdf[None, :], pdf_rows, np.array([float(y_new)]), alpha_k, r
    )
    try:
        return GridDistribution(
            P_prev.grid,
            new_cdf[0],
            None if new_pdf is None else new_pdf[0],
            dict(P_prev.meta),
        )
    except GridDistributionError as err:
        raise EngineError(f"copula update broke a distribution invariant: {err}") from err


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------

def _chain_uniforms(seed: int, chain_ids: Sequence[int], n: int) -> np.ndarray:
    us = np.empty((len(chain_ids), n))
    for i, b in enumerate(chain_ids):
        us[i] = rng.stream(seed, b).random(n)
    return np.clip(us, DRAW_EPS, 1.0 - DRAW_EPS)


def _advance_block(
    P0: GridDistribution,
    config: EngineConfig,
    chain_ids: Sequence[int],
    probe_ys: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Advance a block of chains N steps; returns (samples, final cdf rows, probes).

    ``probes`` maps checkpoint -> (M, n_probe) CDF values when both
    checkpoints and probe_ys are set.
    """
    grid = P0.grid
    m = len(chain_ids)
    rows = np.repeat(P0.cdf[None, :], m, axis=0)
    us = _chain_uniforms(config.seed, chain_ids, config.N)
    alphas = alpha(config.schedule, config.n_train + np.arange(1, config.N + 1))
    samples = np.empty((m, config.N))
    probes: dict = {}
    checkpoints = set(config.checkpoints or ())
    for k in range(1, config.N + 1):
        ys = quantile_rows(grid, rows, us[:, k - 1])
        samples[:, k - 1] = ys
        rows, _ = update_rows(grid, rows, None, ys, alphas[k - 1], config.rho.rho)
        if probe_ys is not None and k in checkpoints:
            probes[k] = np.stack(
                [interp_cdf_rows(grid, rows, np.full(m, py)) for py in probe_ys], axis=1
            )
    return samples, rows, probes


def _functional_values(
    config: EngineConfig, grid: np.ndarray, samples: np.ndarray, final_row: np.ndarray
) -> dict:
    if config.estimator == "empirical":
        dist = EmpiricalCdf(samples)
    else:
        try:
            dist = GridDistribution(grid, final_row)
        except GridDistributionError as err:
            raise EngineError(f"final grid state invalid: {err}") from err
    return {str(f): f.evaluate(dist) for f in config.functionals}


def run_chain(
    P0: GridDistribution,
    config: EngineConfig,
    chain_id: int,
    probe_ys: np.ndarray | None = None,
) -> ChainResult:
    """Roll one chain forward N steps and evaluate its functionals."""
    samples, rows, probes = _advance_block(P0, config, [chain_id], probe_ys)
    samples = samples[0]
    trace = None
    if config.checkpoints:
        running = np.cumsum(samples) / np.arange(1, config.N + 1)
        trace = {}
        for k in config.checkpoints:
            entry = {"running_mean": float(running[k - 1])}
            if k in probes:
                entry["cdf_probe"] = probes[k][0].tolist()
            trace[k] = entry
    values = _functional_values(config, P0.grid, samples, rows[0])
    return ChainResult(chain_id, samples, values, trace)


def run_posterior(
    P0: GridDistribution,
    config: EngineConfig,
    threads: int | None = None,
) -> PosteriorResult:
    """Run B independent chains and summarize the functional draws.

    The summary is a deterministic fold over chain-id order, so the result
    is identical for any thread count or block partition.
    """
    t0 = time.perf_counter()
    grid = P0.grid
    n_threads = max(1, threads or 1)
    blocks = [ids for ids in np.array_split(np.arange(config.B), n_threads) if ids.size]

    def work(ids):
        return ids, _advance_block(P0, config, list(ids))

    results: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    if len(blocks) == 1:
        ids, (samples, rows, _) = work(blocks[0])
        for i, b in enumerate(ids):
            results[int(b)] = (samples[i], rows[i])
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            for ids, (samples, rows, _) in pool.map(work, blocks):
                for i, b in enumerate(ids):
                    results[int(b)] = (samples[i], rows[i])

    draws: dict[str, np.ndarray] = {str(f): np.empty(config.B) for f in config.functionals}
    traces = [] if config.checkpoints else None
    for b in range(config.B):
        samples, final_row = results[b]
        values = _functional_values(config, grid, samples, final_row)
        for name, val in values.items():
            draws[name][b] = val
        if traces is not None:
            running = np.cumsum(samples) / np.arange(1, config.N + 1)
            for k in config.checkpoints:
                traces.append((b, k, float(running[k - 1])))

    functionals = {
        name: FunctionalSummary.from_draws(vals, config.level) for name, vals in draws.items()
    }
    return PosteriorResult(functionals, config.echo(), time.perf_counter() - t0, traces)


def contraction_probe(
    P0: GridDistribution,
    config: EngineConfig,
    probe_ys: Sequence[float],
    M_max: int,
    checkpoints: Sequence[int] | None = None,
) -> list[tuple[int, float]]:
    """Mean |P_N(y) - P_{M_max}(y)| at probe points over config.B repeats.

    Requires a schedule with beta > 1/2; flatter schedules keep the chain
    diffuse forever and the deviation bound carries no information.
    """
    beta = 1.0 if config.schedule.kind == "default" else config.schedule.beta
    if beta <= 0.5:
        raise ValueError(
            f"contraction probe needs beta > 1/2 (got beta = {beta:g}); "
            "with beta <= 1/2 the predictive never contracts and the bound is vacuous"
        )
    cps = tuple(int(c) for c in (checkpoints or decade_checkpoints(M_max)))
    if any(c < 1 or c > M_max for c in cps):
        raise ValueError("checkpoints must lie within [1, M_max]")
    probe_ys = np.asarray(probe_ys, dtype=float)
    probe_cfg = EngineConfig(
        B=config.B,
        N=M_max,
        schedule=config.schedule,
        rho=config.rho,
        seed=config.seed,
        n_train=config.n_train,
        functionals=config.functionals,
        estimator=config.estimator,
        checkpoints=tuple(sorted(set(cps) | {M_max})),
        level=config.level,
    )
    _, final_rows, probes = _advance_block(
        P0, probe_cfg, list(range(config.B)), probe_ys
    )
    final = probes[M_max]
    table = []
    for k in sorted(cps):
        dev = float(np.mean(np.abs(probes[k] - final)))
        table.append((k, dev))
    return table
