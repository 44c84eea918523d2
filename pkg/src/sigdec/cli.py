"""Command line: simulate / sweep / analyze / trace, plus the file formats.

File formats are bit-exact and append/rewrite deterministic:

* results CSV: fixed column order ``d,eps_d,eps_m,tau,stack_bound,trials,
  fail_any,fail_h,fail_v,p_l,eps_l,ci_low,ci_high,master_seed``; floats
  carry 17 significant digits (round-trip exact); ``stack_bound`` is an
  integer or the literal ``inf``.
* trace JSONL: one frame per iteration (or per sub-step with
  ``--substeps``), sparse sorted coordinate lists.
* every output file gets a ``<name>.manifest.json`` sidecar recording the
  tool version and argv; re-running that argv reproduces the file
  byte-exactly (independently of ``--threads``).

Exit codes: 0 ok, 1 usage or malformed input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .automaton import RuleParams, init_zero
from .lattice import H, V, boundary, empty_chain, empty_syndrome, edges_of_chain
from .montecarlo import (
    SweepRow,
    TrialConfig,
    default_tau,
    run_tau_series,
    sweep_row,
)
from .noise import RandomStream, sample_data_flips, sample_meas_flips

CSV_COLUMNS = (
    "d",
    "eps_d",
    "eps_m",
    "tau",
    "stack_bound",
    "trials",
    "fail_any",
    "fail_h",
    "fail_v",
    "p_l",
    "eps_l",
    "ci_low",
    "ci_high",
    "master_seed",
)

OUT_DIR_ENV = "SIGDEC_OUT_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_bound(bound) -> str:
    return "inf" if bound is None else str(int(bound))


def _parse_bound(text: str):
    if text.strip().lower() == "inf":
        return None
    value = int(text)
    if value < 1:
        raise UsageError("--stack-bound must be a positive integer or 'inf'")
    return value


def row_to_record(row: SweepRow) -> dict:
    return {
        "d": str(row.d),
        "eps_d": _fmt_float(row.eps_d),
        "eps_m": _fmt_float(row.eps_m),
        "tau": str(row.tau),
        "stack_bound": _fmt_bound(row.stack_bound),
        "trials": str(row.trials),
        "fail_any": str(row.fail_any),
        "fail_h": str(row.fail_h),
        "fail_v": str(row.fail_v),
        "p_l": _fmt_float(row.p_l),
        "eps_l": _fmt_float(row.eps_l),
        "ci_low": _fmt_float(row.ci_low),
        "ci_high": _fmt_float(row.ci_high),
        "master_seed": str(row.master_seed),
    }


def record_to_row(rec: dict) -> SweepRow:
    return SweepRow(
        d=int(rec["d"]),
        eps_d=float(rec["eps_d"]),
        eps_m=float(rec["eps_m"]),
        tau=int(rec["tau"]),
        stack_bound=None if rec["stack_bound"] == "inf" else int(rec["stack_bound"]),
        trials=int(rec["trials"]),
        fail_any=int(rec["fail_any"]),
        fail_h=int(rec["fail_h"]),
        fail_v=int(rec["fail_v"]),
        p_l=float(rec["p_l"]),
        eps_l=float(rec["eps_l"]),
        ci_low=float(rec["ci_low"]),
        ci_high=float(rec["ci_high"]),
        master_seed=int(rec["master_seed"]),
    )


def append_rows(path: Path, rows: list[SweepRow]):
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new_file:
            writer.writeheader()
        for row in rows:
            writer.writerow(row_to_record(row))


def write_rows(path: Path, rows: list[SweepRow]):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row_to_record(row))


def read_rows(path: Path) -> list[SweepRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise UsageError(f"{path}: empty CSV")
        if tuple(reader.fieldnames) != CSV_COLUMNS:
            raise UsageError(f"{path}: unexpected columns {reader.fieldnames}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(record_to_row(rec))
            except (KeyError, TypeError, ValueError) as exc:
                raise UsageError(f"{path}: malformed CSV at row {lineno}: {exc}") from exc
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return rows


def _resolve_out(path_text: str) -> Path:
    path = Path(path_text)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(out_path: Path, command: str, argv: list[str]):
    manifest = {
        "tool": "sigdec",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_path.with_name(out_path.name + ".manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- simulate ----------------------------------------------------------------


def _add_sim_flags(p: _Parser, require_distance=True):
    p.add_argument("--distance", type=int, required=require_distance)
    p.add_argument("--error-rate", type=float, required=True,
                   help="data error rate; also the measurement rate unless --meas-error-rate is set")
    p.add_argument("--meas-error-rate", type=float, default=None)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stack-bound", type=str, default="inf")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=str, required=True)


def _check_rates(eps_d, eps_m):
    for name, value in (("--error-rate", eps_d), ("--meas-error-rate", eps_m)):
        if not 0.0 <= value <= 1.0:
            raise UsageError(f"{name} must lie in [0, 1]")


def cmd_simulate(args, argv) -> int:
    d = args.distance
    if d < 3:
        raise UsageError("--distance must be >= 3")
    eps_d = args.error_rate
    eps_m = args.error_rate if args.meas_error_rate is None else args.meas_error_rate
    _check_rates(eps_d, eps_m)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    bound = _parse_bound(args.stack_bound)
    taus = (
        [default_tau(d)]
        if args.rounds is None
        else sorted({int(t) for t in args.rounds.split(",")})
    )
    if taus[0] < 1:
        raise UsageError("--rounds must be >= 1")
    config = TrialConfig(
        d=d, eps_d=eps_d, eps_m=eps_m, tau=taus[-1], stack_bound=bound,
        master_seed=args.seed,
    )
    rows = run_tau_series(config, taus, args.trials, threads=args.threads)
    out = _resolve_out(args.out)
    append_rows(out, rows)
    write_manifest(out, "simulate", argv)
    for row in rows:
        print(
            f"d={row.d} eps={_fmt_float(row.eps_d)} tau={row.tau} "
            f"trials={row.trials} fails={row.fail_any} P_L={row.p_l:.3e} "
            f"eps_L={row.eps_l:.3e} CI=[{row.ci_low:.3e}, {row.ci_high:.3e}]"
        )
    return 0


# -- sweep -------------------------------------------------------------------


def _parse_rates(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError("--error-rates expects start:stop:count (log-spaced)")
    start, stop = float(parts[0]), float(parts[1])
    count = int(parts[2])
    if count < 1 or start <= 0 or stop <= 0:
        raise UsageError("--error-rates bounds must be positive, count >= 1")
    if count == 1:
        return [start]
    return [float(x) for x in np.geomspace(start, stop, count)]


def _cell_seed(master: int, d: int, eps_d: float, eps_m: float, tau: int, bound) -> int:
    key = (
        master,
        d,
        int(round(eps_d * 1e9)),
        int(round(eps_m * 1e9)),
        tau,
        0 if bound is None else bound,  # bounds are >= 1, so 0 is free
    )
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0])


def cmd_sweep(args, argv) -> int:
    distances = sorted({int(x) for x in args.distances.split(",")})
    if any(d < 3 for d in distances):
        raise UsageError("distances must be >= 3")
    rates = _parse_rates(args.error_rates)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    bound = _parse_bound(args.stack_bound)
    out = _resolve_out(args.out)
    existing = []
    if out.exists() and out.stat().st_size > 0:
        existing = read_rows(out)
    done = {
        (r.d, _fmt_float(r.eps_d), _fmt_float(r.eps_m), r.tau, r.stack_bound, r.trials, r.master_seed)
        for r in existing
    }
    rows = list(existing)
    for d in distances:
        tau = default_tau(d) if args.rounds is None else int(args.rounds)
        for eps in rates:
            eps_m = eps if args.meas_error_rate is None else args.meas_error_rate
            _check_rates(eps, eps_m)
            seed = _cell_seed(args.seed, d, eps, eps_m, tau, bound)
            key = (d, _fmt_float(eps), _fmt_float(eps_m), tau, bound, args.trials, seed)
            if key in done:
                continue
            config = TrialConfig(
                d=d, eps_d=eps, eps_m=eps_m, tau=tau, stack_bound=bound, master_seed=seed
            )
            rows.append(sweep_row(config, args.trials, threads=args.threads))
            done.add(key)
    rows.sort(key=lambda r: (r.d, r.eps_d, r.eps_m, r.tau, _fmt_bound(r.stack_bound), r.master_seed))
    write_rows(out, rows)
    write_manifest(out, "sweep", argv)
    print(f"{len(rows)} rows in {out}")
    return 0


# -- analyze -----------------------------------------------------------------


def _group_report(rows: list[SweepRow], weighted: bool) -> dict:
    per_d = {}
    fit_errors = {}
    for d in sorted({r.d for r in rows}):
        d_rows = [r for r in rows if r.d == d]
        try:
            per_d[d] = analysis.fit_powerlaw_per_d(d_rows, weighted=weighted)
        except ValueError as exc:
            fit_errors[d] = str(exc)
    report: dict = {
        "per_d": {
            str(d): {
                "intercept": f.intercept,
                "gamma": f.gamma,
                "sigma_gamma": f.sigma_gamma,
                "n_points": f.n_points,
            }
            for d, f in per_d.items()
        },
    }
    if fit_errors:
        report["per_d_errors"] = {str(d): msg for d, msg in fit_errors.items()}
    fits = list(per_d.values())
    try:
        ans = analysis.fit_ansatz(fits)
        report["ansatz"] = {
            "a": ans.a,
            "eps_c": ans.eps_c,
            "gamma": {str(d): g for d, g in ans.gamma.items()},
            "residuals": {str(d): r for d, r in ans.residuals.items()},
        }
    except ValueError as exc:
        report["ansatz"] = {"reason": str(exc)}
    report["crossings"] = [
        {
            "d_i": di,
            "d_j": dj,
            "eps_c_tilde": x,
            "gamma_i": gi,
            "gamma_j": gj,
        }
        for di, dj, x, gi, gj in analysis.crossing_points(fits).pairs
    ]
    return report


def _tau_series_reports(rows: list[SweepRow]) -> list[dict]:
    series_keys = sorted(
        {(r.d, r.eps_d, r.eps_m, _fmt_bound(r.stack_bound)) for r in rows}
    )
    out = []
    for d, eps_d, eps_m, bound_text in series_keys:
        members = sorted(
            (
                r
                for r in rows
                if r.d == d and r.eps_d == eps_d and r.eps_m == eps_m
                and _fmt_bound(r.stack_bound) == bound_text
            ),
            key=lambda r: r.tau,
        )
        if len({r.tau for r in members}) < 3:
            continue
        series = [(r.tau, r.p_l) for r in members]
        fit = analysis.fit_poisson(series)
        tau_d = analysis.convergence_time(series, fit.eps_l) if fit.eps_l > 0 else None
        out.append(
            {
                "d": d,
                "eps_d": eps_d,
                "eps_m": eps_m,
                "stack_bound": bound_text,
                "poisson": {
                    "lambda": fit.lam,
                    "eps_l": fit.eps_l,
                    "r_squared": fit.r_squared,
                    "n_points": fit.n_points,
                },
                "tau_d": "not converged" if tau_d is None else tau_d,
                "series": [[t, p] for t, p in series],
            }
        )
    return out


def cmd_analyze(args, argv) -> int:
    rows = read_rows(Path(args.input))
    weighted = not args.unweighted
    groups = []
    for bound_text in sorted({_fmt_bound(r.stack_bound) for r in rows}):
        bound_rows = [r for r in rows if _fmt_bound(r.stack_bound) == bound_text]
        group = {"stack_bound": bound_text}
        group.update(_group_report(bound_rows, weighted))
        groups.append(group)
    report = {
        "weighted": weighted,
        "benchmark": {"a": analysis.BENCHMARK_A, "eps_c": analysis.BENCHMARK_EPS_C},
        "groups": groups,
        "tau_series": _tau_series_reports(rows),
    }
    out = _resolve_out(args.out)
    with open(out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_manifest(out, "analyze", argv)
    print(f"fit report written to {out}")
    return 0


# -- trace -------------------------------------------------------------------


def _frame(t: int, grid, correction, step: str | None) -> dict:
    frame = {"t": t}
    if step is not None:
        frame["step"] = step
    frame.update(grid.snapshot())
    frame["corrections"] = [
        [r, c, "H" if o == H else "V"] for o, r, c in edges_of_chain(correction)
    ]
    return frame


def cmd_trace(args, argv) -> int:
    d = args.distance
    if d < 3:
        raise UsageError("--distance must be >= 3")
    eps = args.error_rate
    eps_m = eps if args.meas_error_rate is None else args.meas_error_rate
    _check_rates(eps, eps_m)
    rounds = args.rounds if args.rounds is not None else default_tau(d)
    grid = init_zero(RuleParams(d=d, stack_bound=_parse_bound(args.stack_bound)))
    stream = RandomStream(args.seed)
    err = empty_chain(d)
    inject_meas = empty_syndrome(d)
    for spec in args.inject_defect or []:
        r, c = (int(x) for x in spec.split(","))
        inject_meas[r % d, c % d] ^= True
    for spec in args.inject_edge or []:
        o_text, r, c = spec.split(",")
        o = {"H": H, "V": V}.get(o_text.strip().upper())
        if o is None:
            raise UsageError("--inject-edge expects H|V,row,col")
        err[o, int(r) % d, int(c) % d] ^= True

    out = _resolve_out(args.out)
    with open(out, "w") as fh:
        for t in range(1, rounds + 1):
            err ^= sample_data_flips(d, eps, stream)
            measured = boundary(err) ^ sample_meas_flips(d, eps_m, stream)
            if t == 1:
                measured ^= inject_meas
            if args.substeps:
                grid.defect[...] = measured
                frames = [_frame(t, grid, empty_chain(d), "measure")]
                corr = grid.step_match()
                frames.append(_frame(t, grid, corr, "match"))
                grid.step_signals()
                frames.append(_frame(t, grid, empty_chain(d), "signals"))
                attract = grid.step_attract()
                corr = corr ^ attract
                frames.append(_frame(t, grid, attract, "attract"))
                grid.step_cleanup()
                frames.append(_frame(t, grid, empty_chain(d), "cleanup"))
                for frame in frames:
                    fh.write(json.dumps(frame, separators=(",", ":")) + "\n")
            else:
                corr = grid.iterate(measured)
                fh.write(json.dumps(_frame(t, grid, corr, None), separators=(",", ":")) + "\n")
            err ^= corr
    write_manifest(out, "trace", argv)
    print(f"trace written to {out}")
    return 0


def read_trace(path: Path) -> list[dict]:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                frames.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: malformed trace at line {lineno}: {exc}") from exc
    return frames


# -- entry point ---------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="sigdec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one batch and append a results row")
    _add_sim_flags(p)
    p.add_argument("--rounds", type=str, default=None,
                   help="iteration count (default 20*distance); comma list emits one row per value")

    p = sub.add_parser("sweep", help="grid of (distance, error rate) cells")
    p.add_argument("--distances", type=str, required=True)
    p.add_argument("--error-rates", type=str, required=True,
                   help="start:stop:count, log-spaced")
    p.add_argument("--meas-error-rate", type=float, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stack-bound", type=str, default="inf")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", type=str, required=True)

    p = sub.add_parser("analyze", help="fit report from a results CSV")
    p.add_argument("--input", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--unweighted", action="store_true")

    p = sub.add_parser("trace", help="per-iteration JSONL state dump")
    p.add_argument("--distance", type=int, required=True)
    p.add_argument("--error-rate", type=float, default=0.0)
    p.add_argument("--meas-error-rate", type=float, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stack-bound", type=str, default="inf")
    p.add_argument("--inject-defect", action="append", default=None,
                   metavar="ROW,COL", help="measurement error in round 1 (repeatable)")
    p.add_argument("--inject-edge", action="append", default=None,
                   metavar="H|V,ROW,COL", help="initial data error (repeatable)")
    p.add_argument("--substeps", action="store_true")
    p.add_argument("--out", type=str, required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "simulate": cmd_simulate,
            "sweep": cmd_sweep,
            "analyze": cmd_analyze,
            "trace": cmd_trace,
        }[args.command]
        return handler(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
