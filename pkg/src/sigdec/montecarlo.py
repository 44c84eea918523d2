"""Noisy-trial execution and failure statistics.

A trial: start from the zero configuration, run ``tau`` noisy rounds
(data flips, then a noisy measurement, then one decoder iteration whose
corrections feed back into the residual error), then decode the final
residual with one noiseless exact-matching round and read off the
homology class of (injected errors XOR all corrections).

``run_trial`` executes one trial on the reference engine.  ``run_batch``
runs many trials on the bit-packed compiled kernel (bit-identical per
trial to the reference; falls back to the reference loop when numba is
unavailable).  Aggregation is order-insensitive, so thread count and
chunking never change results.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _kernel
from .automaton import RuleParams, init_zero
from .lattice import boundary, homology_class
from .noise import RandomStream, binomial_thresholds, master_key, sample_data_flips, sample_meas_flips
from .readout import correction_from_pairing, mwpm

DEFAULT_CHUNK_TRIALS = 8192


def default_tau(d: int) -> int:
    """Simulation length used throughout: 20 rounds per unit of distance."""
    if d < 3:
        raise ValueError("d must be at least 3")
    return 20 * d


@dataclass(frozen=True)
class TrialConfig:
    d: int
    eps_d: float
    eps_m: float
    tau: int
    stack_bound: int | None = None
    master_seed: int = 0
    trial_index: int = 0
    cell_index: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.d < 3:
            raise ValueError("d must be >= 3")

    def rule_params(self) -> RuleParams:
        return RuleParams(d=self.d, stack_bound=self.stack_bound)


@dataclass(frozen=True)
class TrialOutcome:
    fail_h: int
    fail_v: int
    residual_defect_count: int
    iteration_count: int

    @property
    def failed(self) -> bool:
        return bool(self.fail_h or self.fail_v)


@dataclass(frozen=True)
class BatchStats:
    trials: int
    fail_any: int
    fail_h: int
    fail_v: int
    p_l: float
    ci_low: float
    ci_high: float
    eps_l: float


@dataclass(frozen=True)
class SweepRow:
    d: int
    eps_d: float
    eps_m: float
    tau: int
    stack_bound: int | None
    trials: int
    fail_any: int
    fail_h: int
    fail_v: int
    p_l: float
    eps_l: float
    ci_low: float
    ci_high: float
    master_seed: int


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval; well-behaved at zero counts."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def p_to_rate(p_l: float, tau: int) -> float:
    """Per-iteration logical error rate from the four-sector Poisson model.

    Inverts p_l = (3/4) (1 - (1 - (4/3) eps_l)^tau).  Values above the
    3/4 saturation plateau are clamped with a warning.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if p_l < 0.0:
        raise ValueError("p_l must be >= 0")
    if p_l > 0.75:
        warnings.warn(f"P_L={p_l} exceeds the 3/4 saturation value; clamping")
        p_l = 0.75
    base = 1.0 - (4.0 / 3.0) * p_l
    return 0.75 * (1.0 - base ** (1.0 / tau))


def rate_to_p(eps_l: float, tau: int) -> float:
    """Forward model: expected P_L after tau rounds at constant rate."""
    return 0.75 * (1.0 - (1.0 - (4.0 / 3.0) * eps_l) ** tau)


def reference_residuals(config: TrialConfig, checkpoints) -> dict[int, np.ndarray]:
    """Residual chains (errors XOR corrections) at checkpoint rounds, reference engine."""
    d = config.d
    grid = init_zero(config.rule_params())
    stream = RandomStream(config.master_seed, config.trial_index, config.cell_index)
    err = np.zeros((2, d, d), dtype=bool)
    wanted = set(int(t) for t in checkpoints)
    out = {}
    for t in range(1, max(wanted) + 1):
        err ^= sample_data_flips(d, config.eps_d, stream)
        measured = boundary(err) ^ sample_meas_flips(d, config.eps_m, stream)
        err ^= grid.iterate(measured)
        if t in wanted:
            out[t] = err.copy()
    return out


def run_trial(config: TrialConfig) -> TrialOutcome:
    """One full trial on the reference engine."""
    d = config.d
    err = reference_residuals(config, [config.tau])[config.tau]
    final_syndrome = boundary(err)
    n_defects = int(final_syndrome.sum())
    err = err ^ correction_from_pairing(mwpm(final_syndrome, d), d)
    fail_h, fail_v = homology_class(err)
    return TrialOutcome(
        fail_h=fail_h,
        fail_v=fail_v,
        residual_defect_count=n_defects,
        iteration_count=config.tau,
    )


# -- packed-kernel driver ----------------------------------------------------


def _noise_mode(n: int, p: float):
    if p <= 0.0:
        return 0, np.zeros(0, dtype=np.uint64)
    if p >= 1.0:
        return 2, np.zeros(0, dtype=np.uint64)
    return 1, binomial_thresholds(n, p)


def _priority_arrays(params: RuleParams):
    match_prio = np.array(params.matching_priority, dtype=np.int64)
    attr_type = np.array([k for k, _ in params.attraction_priority], dtype=np.int64)
    attr_dir = np.array([dd for _, dd in params.attraction_priority], dtype=np.int64)
    return match_prio, attr_type, attr_dir


def _stack_planes(config: TrialConfig) -> tuple[int, int]:
    """(effective bound, bit-planes).  Unbounded stacks never exceed d from
    the zero configuration; 2d of headroom keeps the cap unreachable."""
    if config.stack_bound is not None:
        bound = config.stack_bound
        planes = max(1, bound.bit_length())
    else:
        planes = (2 * config.d).bit_length()
        bound = (1 << planes) - 1
    return bound, planes


def run_packed_chunk(
    config: TrialConfig,
    trial0: int,
    n_lanes: int,
    checkpoints,
    inject_err: np.ndarray | None = None,
    inject_meas: np.ndarray | None = None,
    track_quiescence: bool = False,
    audit: bool = False,
):
    """Run ``n_lanes`` consecutive trials on the packed kernel.

    Returns (cp_err, last_active, max_line_charge, max_stack); cp_err is
    uint64[n_checkpoints, 2, d, d, W] holding residual chains.
    """
    if not _kernel.HAVE_KERNEL:
        raise RuntimeError("compiled kernel unavailable")
    d = config.d
    W = (n_lanes + 63) // 64
    params = config.rule_params()
    bound, planes = _stack_planes(config)
    data_mode, data_thr = _noise_mode(2 * d * d, config.eps_d)
    meas_mode, meas_thr = _noise_mode(d * d, config.eps_m)
    k0, k1 = master_key(config.master_seed)
    match_prio, attr_type, attr_dir = _priority_arrays(params)

    pack_err = np.zeros((2, d, d, W), dtype=np.uint64)
    if inject_err is not None:
        pack_err |= inject_err
    pack_meas = np.zeros((d, d, W), dtype=np.uint64)
    if inject_meas is not None:
        pack_meas |= inject_meas

    cps = np.asarray(sorted(checkpoints), dtype=np.int64)
    if len(cps) == 0 or cps[0] < 1 or cps[-1] > config.tau:
        raise ValueError("checkpoints must lie in [1, tau]")

    return _kernel._run_chunk(
        config.d,
        config.tau,
        n_lanes,
        np.uint64(k0),
        np.uint64(k1),
        np.uint64(config.cell_index),
        np.uint64(trial0),
        bound,
        planes,
        data_mode,
        data_thr,
        meas_mode,
        meas_thr,
        pack_err,
        pack_meas,
        cps,
        match_prio,
        attr_type,
        attr_dir,
        track_quiescence,
        audit,
    )


def _lane_mask_words(n_lanes: int, W: int) -> np.ndarray:
    mask = np.zeros(W, dtype=np.uint64)
    full, rem = divmod(n_lanes, 64)
    mask[:full] = np.uint64(0xFFFFFFFFFFFFFFFF)
    if rem:
        mask[full] = np.uint64((1 << rem) - 1)
    return mask


def unpack_lane_chain(packed: np.ndarray, lane: int) -> np.ndarray:
    """Extract one trial's chain from a packed uint64[..., W] array."""
    w, b = divmod(lane, 64)
    return ((packed[..., w] >> np.uint64(b)) & np.uint64(1)).astype(bool)


def _pair_seam_parity(u, v, d: int) -> tuple[int, int]:
    """Seam-crossing parities of the deterministic shortest path u -> v."""
    r1, c1 = u[0] % d, u[1] % d
    r2, c2 = v[0] % d, v[1] % d
    vpar = hpar = 0
    fwd = (r2 - r1) % d
    steps = min(fwd, d - fwd)
    if steps:
        if fwd <= d - fwd:  # south
            vpar = 1 if r1 + steps >= d else 0
        else:  # north: wraps past row -1
            vpar = 1 if r1 - steps < 0 else 0
    fwd = (c2 - c1) % d
    steps = min(fwd, d - fwd)
    if steps:
        if fwd <= d - fwd:  # east
            hpar = 1 if c1 + steps >= d else 0
        else:  # west
            hpar = 1 if c1 - steps < 0 else 0
    return hpar, vpar


def readout_counts_packed(cp_err: np.ndarray, d: int, n_lanes: int):
    """Readout + failure counting on one packed residual snapshot.

    Returns (fail_any, fail_h, fail_v, fail_h_words, fail_v_words).
    """
    errH, errV = cp_err[0], cp_err[1]
    W = errH.shape[-1]
    resid_h = np.bitwise_xor.reduce(errH[:, d - 1, :], axis=0)
    resid_v = np.bitwise_xor.reduce(errV[d - 1, :, :], axis=0)
    bnd = (
        errH
        ^ np.roll(errH, 1, axis=1)
        ^ errV
        ^ np.roll(errV, 1, axis=0)
    )
    active = np.bitwise_or.reduce(bnd.reshape(-1, W), axis=0)
    corr_h = np.zeros(W, dtype=np.uint64)
    corr_v = np.zeros(W, dtype=np.uint64)
    for w in np.nonzero(active)[0]:
        word = int(active[w])
        while word:
            l = (word & -word).bit_length() - 1
            word &= word - 1
            lane = (w << 6) + l
            if lane >= n_lanes:
                continue
            verts_mask = (bnd[:, :, w] >> np.uint64(l)) & np.uint64(1)
            rr, cc = np.nonzero(verts_mask)
            verts = sorted(zip(rr.tolist(), cc.tolist()))
            pairs = [(verts[0], verts[1])] if len(verts) == 2 else mwpm(verts, d)
            hp = vp = 0
            for a, b in pairs:
                ph, pv = _pair_seam_parity(a, b, d)
                hp ^= ph
                vp ^= pv
            if hp:
                corr_h[w] |= np.uint64(1 << l)
            if vp:
                corr_v[w] |= np.uint64(1 << l)
    lane_mask = _lane_mask_words(n_lanes, W)
    fh_words = (resid_h ^ corr_h) & lane_mask
    fv_words = (resid_v ^ corr_v) & lane_mask
    fail_h = int(np.bitwise_count(fh_words).sum())
    fail_v = int(np.bitwise_count(fv_words).sum())
    fail_any = int(np.bitwise_count(fh_words | fv_words).sum())
    return fail_any, fail_h, fail_v, fh_words, fv_words


def _batch_counts(config: TrialConfig, n_trials: int, checkpoints, threads: int = 1):
    """Failure counts per checkpoint, chunked over the packed kernel."""
    cps = sorted(checkpoints)
    counts = [[0, 0, 0] for _ in cps]

    def do_chunk(trial0: int, lanes: int):
        cp_err, _, _, _ = run_packed_chunk(config, trial0, lanes, cps)
        return [readout_counts_packed(cp_err[i], config.d, lanes)[:3] for i in range(len(cps))]

    spans = []
    t0 = 0
    while t0 < n_trials:
        lanes = min(DEFAULT_CHUNK_TRIALS, n_trials - t0)
        spans.append((t0, lanes))
        t0 += lanes
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: do_chunk(*s), spans))
    else:
        results = [do_chunk(*s) for s in spans]
    for res in results:
        for i, (fa, fh, fv) in enumerate(res):
            counts[i][0] += fa
            counts[i][1] += fh
            counts[i][2] += fv
    return counts


def _stats_from_counts(
    config: TrialConfig, n_trials: int, tau: int, fail_any: int, fail_h: int, fail_v: int
) -> BatchStats:
    p_l = fail_any / n_trials
    lo, hi = wilson_interval(fail_any, n_trials)
    return BatchStats(
        trials=n_trials,
        fail_any=fail_any,
        fail_h=fail_h,
        fail_v=fail_v,
        p_l=p_l,
        ci_low=lo,
        ci_high=hi,
        eps_l=p_to_rate(p_l, tau),
    )


def run_batch(
    config: TrialConfig, n_trials: int, threads: int = 1, use_kernel: bool | None = None
) -> BatchStats:
    """Run trials 0..n-1 on derived substreams and aggregate failure counts."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if use_kernel is None:
        use_kernel = _kernel.HAVE_KERNEL
    if use_kernel:
        ((fa, fh, fv),) = _batch_counts(config, n_trials, [config.tau], threads)
    else:
        fa = fh = fv = 0
        for i in range(n_trials):
            out = run_trial(replace(config, trial_index=i))
            fa += out.failed
            fh += out.fail_h
            fv += out.fail_v
    return _stats_from_counts(config, n_trials, config.tau, fa, fh, fv)


def run_tau_series(
    config: TrialConfig, taus, n_trials: int, threads: int = 1
) -> list[SweepRow]:
    """P_L at several horizon values from shared trajectories.

    One set of trials is run to max(taus); the residual is decoded at
    every checkpoint.  Estimates at different tau share trajectories but
    are individually unbiased.
    """
    taus = sorted(set(int(t) for t in taus))
    cfg = replace(config, tau=taus[-1])
    counts = _batch_counts(cfg, n_trials, taus, threads)
    rows = []
    for tau, (fa, fh, fv) in zip(taus, counts):
        stats = _stats_from_counts(cfg, n_trials, tau, fa, fh, fv)
        rows.append(
            SweepRow(
                d=config.d,
                eps_d=config.eps_d,
                eps_m=config.eps_m,
                tau=tau,
                stack_bound=config.stack_bound,
                trials=n_trials,
                fail_any=fa,
                fail_h=fh,
                fail_v=fv,
                p_l=stats.p_l,
                eps_l=stats.eps_l,
                ci_low=stats.ci_low,
                ci_high=stats.ci_high,
                master_seed=config.master_seed,
            )
        )
    return rows


def sweep_row(config: TrialConfig, n_trials: int, threads: int = 1) -> SweepRow:
    stats = run_batch(config, n_trials, threads=threads)
    return SweepRow(
        d=config.d,
        eps_d=config.eps_d,
        eps_m=config.eps_m,
        tau=config.tau,
        stack_bound=config.stack_bound,
        trials=n_trials,
        fail_any=stats.fail_any,
        fail_h=stats.fail_h,
        fail_v=stats.fail_v,
        p_l=stats.p_l,
        eps_l=stats.eps_l,
        ci_low=stats.ci_low,
        ci_high=stats.ci_high,
        master_seed=config.master_seed,
    )
