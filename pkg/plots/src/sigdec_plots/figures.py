"""Result figures: logical-error curves, effective distance, crossing drift,
Markov diagnostics.  Each function returns the matplotlib Figure and
optionally saves it."""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg", force=False)

import matplotlib.pyplot as plt
import numpy as np

from .io import rate_scale, read_fit_report, read_results

_BOUND_MARKERS = {"inf": "o", "1": "v", "2": "^", "3": "s", "4": "D"}


@dataclass(frozen=True)
class FigureSpec:
    kind: str  # logical_curves | effective_distance | crossing_drift | markov | trace_animation
    inputs: tuple
    out: str | None = None
    options: dict = field(default_factory=dict)


def _save(fig, out):
    if out:
        fig.savefig(out, bbox_inches="tight", dpi=150)
    return fig


def _bound_label(bound: str) -> str:
    return "unbounded stacks" if bound == "inf" else f"stack bound {bound}"


def plot_logical_curves(csv_path, fits_path=None, out=None):
    """Per-iteration logical error rate vs physical rate, log-log, with CI
    bars per distance and fitted scaling curves overlaid."""
    rows = read_results(csv_path)
    report = read_fit_report(fits_path) if fits_path else None
    fig, ax = plt.subplots(figsize=(6, 4.5))
    distances = sorted({r.d for r in rows})
    colors = {d: f"C{i}" for i, d in enumerate(distances)}
    for d in distances:
        for bound in sorted({r.stack_bound for r in rows if r.d == d}):
            sel = sorted(
                (r for r in rows if r.d == d and r.stack_bound == bound),
                key=lambda r: r.eps_d,
            )
            pts = [r for r in sel if r.eps_l > 0]
            x = [r.eps_d for r in pts]
            y = [r.eps_l for r in pts]
            lo = [max(r.eps_l - rate_scale(r.ci_low, r.tau), 0.0) for r in pts]
            hi = [rate_scale(r.ci_high, r.tau) - r.eps_l for r in pts]
            ax.errorbar(
                x, y, yerr=[lo, hi], linestyle="none", color=colors[d],
                marker=_BOUND_MARKERS.get(bound, "o"), markersize=4, capsize=2,
                label=f"d={d}, {_bound_label(bound)}",
            )
    if report:
        eps_axis = np.geomspace(min(r.eps_d for r in rows), max(r.eps_d for r in rows), 64)
        for group in report["groups"]:
            ansatz = group.get("ansatz", {})
            if "eps_c" not in ansatz:
                continue
            for d_text, gamma in sorted(ansatz["gamma"].items(), key=lambda kv: int(kv[0])):
                d = int(d_text)
                curve = ansatz["a"] / d * (eps_axis / ansatz["eps_c"]) ** gamma
                ax.plot(eps_axis, curve, color=colors.get(d, "gray"), linewidth=1, alpha=0.7)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("physical error rate")
    ax.set_ylabel("logical error rate per iteration")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", linestyle=":", alpha=0.4)
    return _save(fig, out)


def plot_effective_distance(fits_path, out=None):
    """Fitted scaling exponent vs code distance, one series per stack bound,
    with the optimal (d+1)/2 reference as a black dashed line."""
    report = read_fit_report(fits_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    all_d = []
    for i, group in enumerate(report["groups"]):
        per_d = group.get("per_d", {})
        if not per_d:
            continue
        ds = sorted(int(x) for x in per_d)
        gammas = [per_d[str(d)]["gamma"] for d in ds]
        sigmas = [per_d[str(d)].get("sigma_gamma", 0.0) for d in ds]
        ax.errorbar(ds, gammas, yerr=sigmas, marker=_BOUND_MARKERS.get(group["stack_bound"], "o"),
                    color=f"C{i}", linestyle="-", capsize=3,
                    label=_bound_label(group["stack_bound"]))
        all_d.extend(ds)
    if not all_d:
        raise ValueError("fit report contains no per-distance exponents")
    ref = np.array(sorted(set(all_d)))
    ax.plot(ref, (ref + 1) / 2, "k--", label="(d+1)/2")
    ax.set_xlabel("code distance d")
    ax.set_ylabel("effective distance")
    ax.legend(fontsize=8)
    ax.grid(True, linestyle=":", alpha=0.4)
    return _save(fig, out)


def plot_crossing_drift(fits_path, out=None):
    """Pairwise crossing points vs the smaller distance, with the global
    fitted scale as a dotted reference line."""
    report = read_fit_report(fits_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    drew = False
    for i, group in enumerate(report["groups"]):
        crossings = group.get("crossings", [])
        if not crossings:
            continue
        x = [c["d_i"] for c in crossings]
        y = [c["eps_c_tilde"] for c in crossings]
        ax.plot(x, y, marker="o", color=f"C{i}", linestyle="-",
                label=_bound_label(group["stack_bound"]))
        ansatz = group.get("ansatz", {})
        if "eps_c" in ansatz:
            ax.axhline(ansatz["eps_c"], color=f"C{i}", linestyle=":",
                       label=f"global fit, {_bound_label(group['stack_bound'])}")
        drew = True
    if not drew:
        raise ValueError("fit report contains no crossing points")
    ax.set_xlabel("smaller code distance of the pair")
    ax.set_ylabel("pairwise crossing point")
    ax.legend(fontsize=7)
    ax.grid(True, linestyle=":", alpha=0.4)
    return _save(fig, out)


def plot_markov(csv_path, fits_path, out=None):
    """Two panels: the transformed failure series log10(1 - 4/3 P_L) vs tau
    with the fitted slope, and P_L(tau)/tau with the fitted rate and its
    0.9 threshold plus the measured convergence-time marker."""
    rows = read_results(csv_path)
    report = read_fit_report(fits_path)
    series_entries = report.get("tau_series", [])
    if not series_entries:
        raise ValueError("fit report has no tau series")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for i, entry in enumerate(series_entries):
        sel = sorted(
            (
                r
                for r in rows
                if r.d == entry["d"] and r.eps_d == entry["eps_d"]
                and r.stack_bound == entry["stack_bound"]
            ),
            key=lambda r: r.tau,
        )
        taus = np.array([r.tau for r in sel])
        p = np.array([r.p_l for r in sel])
        label = f"d={entry['d']}, eps={entry['eps_d']:g}"
        ax1.semilogy(taus, 1.0 - (4.0 / 3.0) * p, "o", color=f"C{i}", markersize=4, label=label)
        lam = entry["poisson"]["lambda"]
        ax1.semilogy(taus, (1.0 - lam) ** taus, "-", color=f"C{i}", alpha=0.7,
                     label=f"fit, rate {entry['poisson']['eps_l']:.2e}")
        ratio = p / taus
        ax2.plot(taus, ratio, "o-", color=f"C{i}", markersize=4, label=label)
        ax2.axhline(entry["poisson"]["eps_l"], color=f"C{i}", linestyle="-", alpha=0.5)
        ax2.axhline(0.9 * entry["poisson"]["eps_l"], color=f"C{i}", linestyle=":",
                    label="0.9 threshold")
        if isinstance(entry.get("tau_d"), int):
            ax2.axvline(entry["tau_d"], color=f"C{i}", linestyle="--", alpha=0.6,
                        label=f"convergence at {entry['tau_d']}")
    ax1.set_xlabel("simulation time")
    ax1.set_ylabel("1 - 4/3 P_L")
    ax1.legend(fontsize=7)
    ax2.set_xlabel("simulation time")
    ax2.set_ylabel("P_L / time")
    ax2.legend(fontsize=7)
    for ax in (ax1, ax2):
        ax.grid(True, linestyle=":", alpha=0.4)
    return _save(fig, out)
