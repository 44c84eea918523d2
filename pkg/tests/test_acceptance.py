"""Release acceptance suite: one test per criterion, each printing a PASS line.

Statistical criteria run on pinned master seeds; the margins were sized so
the checks hold with large headroom at these budgets (see the calibration
notes in the README).  Run with ``pytest tests/test_acceptance.py -s``.
"""

import time

import numpy as np
import pytest

from sigdec import _kernel
from sigdec.analysis import (
    convergence_time,
    crossing_point,
    fit_ansatz,
    fit_poisson,
    fit_powerlaw_per_d,
)
from sigdec.automaton import RuleParams, init_zero
from sigdec.lattice import boundary, homology_class, toric_distance
from sigdec.montecarlo import (
    TrialConfig,
    p_to_rate,
    rate_to_p,
    run_batch,
    run_packed_chunk,
    run_tau_series,
    sweep_row,
    unpack_lane_chain,
    wilson_interval,
)
from sigdec.readout import matching_bruteforce, mwpm

pytestmark = pytest.mark.acceptance

needs_kernel = pytest.mark.skipif(not _kernel.HAVE_KERNEL, reason="numba unavailable")


def _report(name, detail=""):
    print(f"\nPASS: {name}" + (f" ({detail})" if detail else ""))


# -- criterion 1: charge conservation -----------------------------------------


@needs_kernel
def test_charge_conservation():
    """Q1 = Q2 = 0 and all per-line charges 0 after every iteration:
    1000 noisy iterations, d in {5,9,13}, m in {1,3,inf}, 10 seeds."""
    t0 = time.time()
    for d in (5, 9, 13):
        for bound in (1, 3, None):
            config = TrialConfig(
                d=d, eps_d=0.01, eps_m=0.01, tau=1000, stack_bound=bound,
                master_seed=52000 + d,
            )
            _, _, max_q, max_stack = run_packed_chunk(
                config, 0, 10, [config.tau], audit=True
            )
            assert max_q == 0, (d, bound)
            limit = bound if bound is not None else d
            assert max_stack <= limit, (d, bound, max_stack)
    # reference engine spot check of the same invariant
    from sigdec.noise import RandomStream, sample_data_flips, sample_meas_flips
    from sigdec.lattice import empty_chain

    grid = init_zero(RuleParams(d=5, stack_bound=3))
    err = empty_chain(5)
    stream = RandomStream(7)
    for _ in range(100):
        err ^= sample_data_flips(5, 0.01, stream)
        synd = boundary(err) ^ sample_meas_flips(5, 0.01, stream)
        err ^= grid.iterate(synd)
        rep = grid.charges()
        assert rep.q1 == 0 and rep.q2 == 0 and rep.max_line_deviation() == 0
    elapsed = time.time() - t0
    assert elapsed < 60
    _report("charge conservation", f"90 configs x 1000 iterations, {elapsed:.0f}s")


# -- criterion 2: relaxation ---------------------------------------------------


@needs_kernel
def test_relaxation_every_position():
    """A single injected measurement defect relaxes to the exact zero
    configuration with empty net correction, for every position, d in
    {5,7,9,11}; the relaxation time (3 iterations) is position-independent."""
    t0 = time.time()
    for d in (5, 7, 9, 11):
        n = d * d
        W = (n + 63) // 64
        inject = np.zeros((d, d, W), dtype=np.uint64)
        for lane in range(n):
            inject[lane // d, lane % d, lane // 64] |= np.uint64(1 << (lane % 64))
        config = TrialConfig(d=d, eps_d=0.0, eps_m=0.0, tau=8, stack_bound=None, master_seed=0)
        cp_err, last_active, _, _ = run_packed_chunk(
            config, 0, n, [config.tau], inject_meas=inject, track_quiescence=True
        )
        for lane in range(n):
            assert last_active[lane] == 2, (d, lane)  # zero from iteration 3 on
            assert not unpack_lane_chain(cp_err[0], lane).any(), (d, lane)
    elapsed = time.time() - t0
    assert elapsed < 60
    _report("relaxation", f"all positions at d in 5..11, T_relax=3, {elapsed:.1f}s")


# -- criterion 3: offline pairing ----------------------------------------------


def _saw_edge_sets(length_max):
    """Edge sets of all self-avoiding walks from the origin, by length."""
    out = {length: set() for length in range(1, length_max + 1)}

    def step(pos, dd):
        r, c = pos
        return [((r - 1, c), (1, r - 1, c)), ((r, c + 1), (0, r, c)),
                ((r + 1, c), (1, r, c)), ((r, c - 1), (0, r, c - 1))][dd]

    def rec(path, edges):
        if edges:
            out[len(edges)].add(frozenset(edges))
        if len(edges) == length_max:
            return
        for dd in range(4):
            nxt, edge = step(path[-1], dd)
            if nxt in path:
                continue
            rec(path + [nxt], edges + [edge])

    rec([(0, 0)], [])
    return out


@needs_kernel
def test_offline_pairing_exhaustive():
    """Every two-defect error chain of length L <= (d-1)/2 (all shapes up to
    translation) is matched, the memory relaxes to zero, and the total
    homology is trivial, within 10L + 20 iterations; d in {7, 9, 11}."""
    t0 = time.time()
    total = 0
    for d in (7, 9, 11):
        shapes = _saw_edge_sets((d - 1) // 2)
        for length, edge_sets in shapes.items():
            tau = 10 * length + 20
            sets = sorted(edge_sets, key=sorted)
            n = len(sets)
            W = (n + 63) // 64
            inject = np.zeros((2, d, d, W), dtype=np.uint64)
            for lane, edges in enumerate(sets):
                for o, r, c in edges:
                    inject[o, r % d, c % d, lane // 64] ^= np.uint64(1 << (lane % 64))
            config = TrialConfig(d=d, eps_d=0.0, eps_m=0.0, tau=tau,
                                 stack_bound=None, master_seed=0)
            cp_err, last_active, _, _ = run_packed_chunk(
                config, 0, n, [tau], inject_err=inject, track_quiescence=True
            )
            for lane in range(n):
                assert last_active[lane] < tau, (d, length, sorted(sets[lane]))
                residual = unpack_lane_chain(cp_err[0], lane)
                assert not boundary(residual).any(), (d, length, sorted(sets[lane]))
                assert homology_class(residual) == (0, 0), (d, length, sorted(sets[lane]))
            total += n
    _report("offline pairing", f"{total} chain shapes, {time.time()-t0:.0f}s")


# -- criterion 4: readout exactness ---------------------------------------------


def test_readout_exactness():
    """mwpm weight equals the exhaustive oracle on 500 random instances per
    n in {4,...,12} and d in {7, 15}; exact equality."""
    t0 = time.time()
    rng = np.random.default_rng(424242)
    checked = 0
    for d in (7, 15):
        for n in (4, 6, 8, 10, 12):
            for _ in range(500):
                sites = rng.choice(d * d, size=n, replace=False)
                defects = [(int(s) // d, int(s) % d) for s in sites]
                fast = mwpm(defects, d)
                oracle = matching_bruteforce(defects, d)
                w_fast = sum(toric_distance(u, v, d) for u, v in fast)
                w_oracle = sum(toric_distance(u, v, d) for u, v in oracle)
                assert w_fast == w_oracle
                assert fast == oracle  # same canonical tie-break
                checked += 1
    elapsed = time.time() - t0
    assert elapsed < 120
    _report("readout exactness", f"{checked} instances, {elapsed:.0f}s")


# -- criterion 5: exponential suppression ---------------------------------------


def _eps_l_interval(stats, tau, z):
    lo, hi = wilson_interval(stats.fail_any, stats.trials, z=z)
    return p_to_rate(lo, tau), p_to_rate(hi, tau)


@needs_kernel
def test_suppression_smoke():
    """Reduced variant: eps = 0.4%, 1e4 trials per distance; eps_L strictly
    ordered across d in {5, 9, 13} with non-overlapping 90% intervals."""
    t0 = time.time()
    results = {}
    for d in (5, 9, 13):
        config = TrialConfig(d=d, eps_d=0.004, eps_m=0.004, tau=20 * d,
                             stack_bound=None, master_seed=2026004)
        stats = run_batch(config, 10_000)
        results[d] = (stats, _eps_l_interval(stats, config.tau, z=1.645))
    for small, large in ((5, 9), (9, 13)):
        assert results[large][0].eps_l < results[small][0].eps_l
        assert results[large][1][1] < results[small][1][0], "90% CIs overlap"
    elapsed = time.time() - t0
    assert elapsed < 1200
    detail = ", ".join(f"d={d}: {results[d][0].eps_l:.2e}" for d in (5, 9, 13))
    _report("suppression (smoke)", f"{detail}, {elapsed:.0f}s")


@needs_kernel
def test_suppression_full():
    """eps = 0.2% < pseudothreshold, tau = 20d, 1e5 trials per distance;
    eps_L(13) < eps_L(9) < eps_L(5) with non-overlapping 95% intervals."""
    t0 = time.time()
    results = {}
    for d in (5, 9, 13):
        config = TrialConfig(d=d, eps_d=0.002, eps_m=0.002, tau=20 * d,
                             stack_bound=None, master_seed=2026002)
        stats = run_batch(config, 100_000)
        results[d] = (stats, _eps_l_interval(stats, config.tau, z=1.96))
    for small, large in ((5, 9), (9, 13)):
        assert results[large][0].eps_l < results[small][0].eps_l
        assert results[large][1][1] < results[small][1][0], "95% CIs overlap"
    elapsed = time.time() - t0
    detail = ", ".join(f"d={d}: {results[d][0].eps_l:.2e}" for d in (5, 9, 13))
    _report("suppression (full)", f"{detail}, {elapsed:.0f}s")


# -- criterion 6: effective distance --------------------------------------------

EFF_EPS_GRID = (0.002, 0.0026, 0.0033, 0.0042, 0.0045)


def _gamma_fit(d, bound, seed_base):
    rows = []
    for i, eps in enumerate(EFF_EPS_GRID):
        config = TrialConfig(d=d, eps_d=eps, eps_m=eps, tau=20 * d, stack_bound=bound,
                             master_seed=seed_base + 1000 * d + i)
        rows.append(sweep_row(config, 40_000))
    return fit_powerlaw_per_d(rows)


@needs_kernel
def test_effective_distance():
    """Fitted gamma_d within +-1.0 of (d+1)/2 for d in {5,7,9} over
    eps in [0.2%, 0.45%]; stack bound 3 matches unbounded within the
    combined fit uncertainty."""
    t0 = time.time()
    fits = {}
    for bound in (3, None):
        for d in (5, 7, 9):
            fit = _gamma_fit(d, bound, seed_base=61000 if bound else 62000)
            fits[(bound, d)] = fit
            assert abs(fit.gamma - (d + 1) / 2) <= 1.0, (bound, d, fit.gamma)
    for d in (5, 7, 9):
        a, b = fits[(3, d)], fits[(None, d)]
        combined = (a.sigma_gamma**2 + b.sigma_gamma**2) ** 0.5
        assert abs(a.gamma - b.gamma) <= 2 * combined, (d, a.gamma, b.gamma)
    elapsed = time.time() - t0
    detail = ", ".join(
        f"d={d}: m3={fits[(3, d)].gamma:.2f}/inf={fits[(None, d)].gamma:.2f}"
        for d in (5, 7, 9)
    )
    _report("effective distance", f"{detail}, {elapsed:.0f}s")


# -- criterion 7: markovianity ---------------------------------------------------


@needs_kernel
def test_markovianity():
    """At d=9, eps=0.4%: log(1 - 4/3 P_L(tau)) is linear in tau with
    R^2 >= 0.99 over [tau_d, 40d], and tau_d <= 10d = 90."""
    t0 = time.time()
    taus = list(range(15, 361, 15))
    config = TrialConfig(d=9, eps_d=0.004, eps_m=0.004, tau=360,
                         stack_bound=None, master_seed=20267)
    rows = run_tau_series(config, taus, 200_000)
    series = [(r.tau, r.p_l) for r in rows]
    eps_l = p_to_rate(rows[-1].p_l, rows[-1].tau)
    tau_d = convergence_time(series, eps_l)
    assert tau_d is not None and tau_d <= 90, tau_d
    tail = [(t, p) for t, p in series if t >= tau_d]
    x = np.array([t for t, _ in tail], dtype=float)
    y = np.log1p(-(4.0 / 3.0) * np.array([p for _, p in tail]))
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    ss_res = float(((y - design @ coef) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot
    assert r_squared >= 0.99, r_squared
    elapsed = time.time() - t0
    _report("markovianity", f"tau_d={tau_d}, R^2={r_squared:.5f}, {elapsed:.0f}s")


# -- criterion 8: fit pipeline exactness -----------------------------------------


def test_fit_pipeline_exactness():
    """Analysis operations recover generating parameters from exact synthetic
    data to <= 1e-10 relative error (A = 5.7e-4, eps_c = 0.0068 truth)."""
    t0 = time.time()
    a_true, eps_c_true = 5.7e-4, 0.0068
    from sigdec.montecarlo import SweepRow

    per_d = []
    for d in (5, 7, 9, 11):
        gamma = (d + 1) / 2
        rows = []
        for eps in np.geomspace(0.002, 0.006, 6):
            eps_l = (a_true / d) * (eps / eps_c_true) ** gamma
            tau = 20 * d
            p_l = rate_to_p(eps_l, tau)
            rows.append(SweepRow(d=d, eps_d=float(eps), eps_m=float(eps), tau=tau,
                                 stack_bound=None, trials=10**9,
                                 fail_any=max(1, round(p_l * 10**9)), fail_h=0, fail_v=0,
                                 p_l=p_l, eps_l=eps_l, ci_low=p_l * 0.9,
                                 ci_high=p_l * 1.1, master_seed=0))
        fit = fit_powerlaw_per_d(rows, weighted=False)
        assert abs(fit.gamma - gamma) / gamma < 1e-10
        per_d.append(fit)
    ans = fit_ansatz(per_d)
    assert abs(ans.a - a_true) / a_true < 1e-10
    assert abs(ans.eps_c - eps_c_true) / eps_c_true < 1e-10
    # two lines built to cross at eps = 0.005 exactly
    import math

    from sigdec.analysis import PerDFit

    cross_true = 0.005
    f1 = PerDFit(d=5, intercept=math.log(1e-4) - 3.0 * math.log(cross_true), gamma=3.0,
                 sigma_intercept=0.0, sigma_gamma=0.0, n_points=6)
    f2 = PerDFit(d=7, intercept=math.log(1e-4) - 4.0 * math.log(cross_true), gamma=4.0,
                 sigma_intercept=0.0, sigma_gamma=0.0, n_points=6)
    assert abs(crossing_point(f1, f2) - cross_true) / cross_true < 1e-10
    lam = 1.5e-3
    poisson = fit_poisson([(t, 0.75 * (1 - (1 - lam) ** t)) for t in range(20, 400, 20)])
    assert abs(poisson.lam - lam) / lam < 1e-10
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _report("fit pipeline exactness", f"{elapsed * 1000:.0f}ms")


# -- criterion 9: determinism -----------------------------------------------------


@needs_kernel
def test_determinism(tmp_path, monkeypatch):
    """Identical manifests give byte-identical outputs, independent of
    --threads; kernel trials are bit-identical to reference trials."""
    import json

    from sigdec.cli import main

    t0 = time.time()
    # batch/CSV reruns, with different thread counts and chunk sizes
    import sigdec.montecarlo as mc

    args = ["simulate", "--distance", "5", "--error-rate", "0.01", "--trials", "400",
            "--seed", "99", "--stack-bound", "3"]
    paths = []
    for i, threads in enumerate((1, 4)):
        out = tmp_path / f"r{i}.csv"
        monkeypatch.setattr(mc, "DEFAULT_CHUNK_TRIALS", 64 if threads > 1 else 8192)
        assert main(args + ["--threads", str(threads), "--out", str(out)]) == 0
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    manifest = json.loads((tmp_path / "r0.csv.manifest.json").read_text())
    (tmp_path / "r0.csv").unlink()
    assert main(manifest["argv"]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()

    # trace rerun
    for name in ("t1.jsonl", "t2.jsonl"):
        assert main(["trace", "--distance", "7", "--error-rate", "0.02", "--rounds", "30",
                     "--seed", "5", "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "t1.jsonl").read_bytes() == (tmp_path / "t2.jsonl").read_bytes()

    # kernel lanes == reference trials, bit for bit
    config = TrialConfig(d=7, eps_d=0.008, eps_m=0.008, tau=60, stack_bound=3, master_seed=31)
    batch = run_batch(config, 128, use_kernel=True)
    loop = run_batch(config, 128, use_kernel=False)
    assert batch == loop
    _report("determinism", f"{time.time()-t0:.0f}s")
