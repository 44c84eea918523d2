"""Statistical post-processing: power-law fits, pseudothreshold, crossings,
Poisson-model diagnostics and convergence-time extraction.

All fits are closed-form least squares in log space (the scaling ansatz
``eps_L = (A/d) (eps/eps_c)^gamma_d`` is exactly separable), so results
are deterministic and recover generating parameters to machine precision
on exact synthetic data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .montecarlo import SweepRow, p_to_rate

# Benchmark values quoted for comparison next to fitted results.
BENCHMARK_A = 5.7e-4
BENCHMARK_EPS_C = 0.0068


@dataclass(frozen=True)
class PerDFit:
    """Per-distance power law log(eps_L) = intercept + gamma * log(eps)."""

    d: int
    intercept: float
    gamma: float
    sigma_intercept: float
    sigma_gamma: float
    n_points: int


@dataclass(frozen=True)
class AnsatzFit:
    a: float
    eps_c: float
    gamma: dict
    residuals: dict


@dataclass(frozen=True)
class CrossingResult:
    pairs: list  # (d_i, d_j, eps_c_tilde, gamma_i, gamma_j)


@dataclass(frozen=True)
class PoissonFit:
    lam: float
    eps_l: float
    r_squared: float
    n_points: int


def _row_sigma_log(row: SweepRow) -> float:
    """Log-space standard error of eps_L from the Wilson interval."""
    lo = p_to_rate(row.ci_low, row.tau)
    hi = p_to_rate(row.ci_high, row.tau)
    if lo <= 0.0:
        # k >= 1 keeps the Wilson lower bound positive; guard anyway
        return 1.0
    return (math.log(hi) - math.log(lo)) / (2 * 1.96)


def fit_powerlaw_per_d(rows: list[SweepRow], weighted: bool = True) -> PerDFit:
    """Weighted linear least squares of log(eps_L) against log(eps).

    Rows with zero observed failures carry no log-space information and
    are excluded.  Requires at least two usable rows at a single d.
    """
    ds = {r.d for r in rows}
    if len(ds) != 1:
        raise ValueError("fit_powerlaw_per_d expects rows for exactly one distance")
    usable = [r for r in rows if r.fail_any > 0 and r.eps_l > 0.0]
    if len(usable) < 2:
        raise ValueError("need at least 2 rows with nonzero failures")
    x = np.array([math.log(r.eps_d) for r in usable])
    y = np.array([math.log(r.eps_l) for r in usable])
    w = (
        np.array([1.0 / _row_sigma_log(r) ** 2 for r in usable])
        if weighted
        else np.ones(len(usable))
    )
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    if sxx == 0.0:
        raise ValueError("all rows share one error rate; slope unidentifiable")
    gamma = (w * (x - xbar) * (y - ybar)).sum() / sxx
    intercept = ybar - gamma * xbar
    sigma_gamma = math.sqrt(1.0 / sxx)
    sigma_intercept = math.sqrt(1.0 / sw + xbar**2 / sxx)
    return PerDFit(
        d=ds.pop(),
        intercept=intercept,
        gamma=gamma,
        sigma_intercept=sigma_intercept,
        sigma_gamma=sigma_gamma,
        n_points=len(usable),
    )


def fit_ansatz(per_d: list[PerDFit]) -> AnsatzFit:
    """Second-stage closed-form fit of (A, eps_c) across distances.

    Stage one gives, per distance, log(eps_L) = b_d + gamma_d log(eps).
    Matching the scaling form log(eps_L) = log(A/d) + gamma_d (log eps -
    log eps_c) requires b_d + log d = log A - gamma_d log eps_c, linear
    in (log A, log eps_c).
    """
    if len(per_d) < 3:
        raise ValueError("eps_c unidentifiable (need fits for at least 3 distances)")
    gammas = np.array([f.gamma for f in per_d])
    if np.ptp(gammas) < 1e-12:
        raise ValueError("eps_c unidentifiable (all slopes equal)")
    target = np.array([f.intercept + math.log(f.d) for f in per_d])
    design = np.column_stack([np.ones(len(per_d)), -gammas])
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    log_a, log_eps_c = coef
    resid = target - design @ coef
    return AnsatzFit(
        a=math.exp(log_a),
        eps_c=math.exp(log_eps_c),
        gamma={f.d: f.gamma for f in per_d},
        residuals={f.d: float(r) for f, r in zip(per_d, resid)},
    )


def crossing_point(fit_i: PerDFit, fit_j: PerDFit) -> float:
    """Crossing of two fitted log-log lines; the shared-amplitude,
    shared-scale solution of the two-distance ansatz."""
    if abs(fit_i.gamma - fit_j.gamma) < 1e-12:
        raise ValueError("no crossing")
    return math.exp((fit_j.intercept - fit_i.intercept) / (fit_i.gamma - fit_j.gamma))


def crossing_points(per_d: list[PerDFit]) -> CrossingResult:
    """Crossings of successive distance pairs, ordered by d."""
    fits = sorted(per_d, key=lambda f: f.d)
    pairs = []
    for a, b in zip(fits, fits[1:]):
        try:
            pairs.append((a.d, b.d, crossing_point(a, b), a.gamma, b.gamma))
        except ValueError:
            continue
    return CrossingResult(pairs=pairs)


def fit_poisson(series: list[tuple[int, float]]) -> PoissonFit:
    """Least-squares fit of the four-sector Poisson model to P_L(tau).

    Transforms to y = log(1 - (4/3) P_L), linear through the origin with
    slope log(1 - lambda).  Points at or beyond the 3/4 plateau are
    excluded with a warning.  ``r_squared`` is the plain linearity R^2 of
    the transformed series (intercept allowed).
    """
    if len(series) < 3:
        raise ValueError("need at least 3 points")
    kept = [(t, p) for t, p in series if p < 0.75]
    if len(kept) < len(series):
        warnings.warn("excluded points with P_L >= 3/4 (saturated)")
    if len(kept) < 2:
        raise ValueError("too few unsaturated points")
    taus = np.array([t for t, _ in kept], dtype=float)
    y = np.log1p(-(4.0 / 3.0) * np.array([p for _, p in kept]))
    slope = (taus * y).sum() / (taus * taus).sum()
    lam = 1.0 - math.exp(slope)
    # linearity diagnostic (free intercept)
    r_squared = 1.0
    if len(kept) >= 3 and np.ptp(y) > 0:
        A = np.column_stack([np.ones_like(taus), taus])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        ss_tot = ((y - y.mean()) ** 2).sum()
        r_squared = 1.0 - float((resid**2).sum() / ss_tot) if ss_tot > 0 else 1.0
    return PoissonFit(lam=lam, eps_l=0.75 * lam, r_squared=r_squared, n_points=len(kept))


def convergence_time(series: list[tuple[int, float]], eps_l: float):
    """Earliest sampled tau after which P_L(tau)/tau stays above 0.9 eps_L.

    Returns None when the condition never holds through the last sample.
    """
    if not series:
        raise ValueError("empty series")
    if eps_l <= 0.0:
        raise ValueError("eps_l must be positive")
    ordered = sorted(series)
    tau_d = None
    for tau, p in reversed(ordered):
        if p / tau > 0.9 * eps_l:
            tau_d = tau
        else:
            break
    return tau_d
