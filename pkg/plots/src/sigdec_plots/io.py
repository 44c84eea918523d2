"""Readers for the sigdec file formats (results CSV, fit JSON, trace JSONL)."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

EXPECTED_COLUMNS = (
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


@dataclass(frozen=True)
class ResultRow:
    d: int
    eps_d: float
    eps_m: float
    tau: int
    stack_bound: str  # "inf" or the integer as text
    trials: int
    fail_any: int
    p_l: float
    eps_l: float
    ci_low: float
    ci_high: float


def read_results(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != EXPECTED_COLUMNS:
            raise ValueError(f"{path}: not a sigdec results CSV (columns {reader.fieldnames})")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(
                    ResultRow(
                        d=int(rec["d"]),
                        eps_d=float(rec["eps_d"]),
                        eps_m=float(rec["eps_m"]),
                        tau=int(rec["tau"]),
                        stack_bound=rec["stack_bound"],
                        trials=int(rec["trials"]),
                        fail_any=int(rec["fail_any"]),
                        p_l=float(rec["p_l"]),
                        eps_l=float(rec["eps_l"]),
                        ci_low=float(rec["ci_low"]),
                        ci_high=float(rec["ci_high"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}: malformed row {lineno}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def read_fit_report(path) -> dict:
    with open(path) as fh:
        report = json.load(fh)
    if "groups" not in report:
        raise ValueError(f"{path}: not a sigdec fit report")
    return report


def read_trace(path) -> list[dict]:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                frames.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed trace line {lineno}: {exc}") from exc
    return frames


def rate_scale(p: float, tau: int) -> float:
    """Display transform of a per-run probability to the per-iteration rate
    axis used by the rate plots (same convention the results files use for
    their eps_l column)."""
    return 0.75 * (1.0 - (1.0 - min(p, 0.75) * 4.0 / 3.0) ** (1.0 / tau))
