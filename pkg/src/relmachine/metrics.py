"""Lorentz factors and local-versus-global complexity profiles from traces."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .relative_model import Trace


class MetricsError(ValueError):
    pass


class SummaryTraceError(MetricsError):
    """Space recount needs per-step records, which summary traces drop."""


def lorentz_time(trace: Trace, tau: int) -> int:
    """gamma_{k_tau} = k_{tau+1} - k_tau, for 1 <= tau < |K|."""
    if not 1 <= tau < len(trace.K):
        raise MetricsError(f"tau={tau} needs k_tau and k_(tau+1); trace has {len(trace.K)} ticks")
    return trace.K[tau] - trace.K[tau - 1]


def lorentz_space(trace: Trace, tau: int, output_length: int) -> Fraction:
    """gamma_{g_tau} = (g_{tau+1} - g_tau) / output_length."""
    if output_length < 1:
        raise MetricsError("output length must be at least one bit")
    g = trace.space_per_tau
    if not 1 <= tau < len(g):
        raise MetricsError(f"tau={tau} needs g_tau and g_(tau+1); trace has {len(g)}")
    return Fraction(g[tau] - g[tau - 1], output_length)


def _touched_cells(steps: Iterable, scrap, local) -> int:
    scrap_cells, local_cells = set(), set()
    for s in steps:
        if s.cell is None:
            continue
        if s.cell in scrap:
            scrap_cells.add(s.cell)
        elif s.cell in local and s.op in ("write", "commit"):
            local_cells.add(s.cell)
    return len(scrap_cells) + len(local_cells)


def space_used(trace: Trace, tau: int) -> int:
    """g_tau recounted from the per-step records of (k_{tau-1}, k_tau]."""
    if not trace.full:
        raise SummaryTraceError("space_used needs a full-mode trace; rerun with snapshots='full'")
    if not 1 <= tau <= len(trace.K):
        raise MetricsError(f"tau={tau} outside 1..{len(trace.K)}")
    lo, hi = trace.k(tau - 1), trace.k(tau)
    steps = (s for s in trace.steps if lo < s.t <= hi)
    return _touched_cells(steps, trace.layout.scrap, trace.layout.local)


def space_from_records(records: Iterable[Mapping], layout: Mapping, K: list[int]) -> list[int]:
    """g_tau for every tau, from exported JSON step records."""
    scrap = range(*layout["scrap"])
    local = range(*layout["local"])
    per = [dict(scrap=set(), local=set()) for _ in K]
    for rec in records:
        cell = rec.get("cell")
        if cell is None:
            continue
        i = int(np.searchsorted(K, rec["t"]))  # K[i-1] < t <= K[i]
        if i >= len(K):
            continue
        if cell in scrap:
            per[i]["scrap"].add(cell)
        elif cell in local and rec["op"] in ("write", "commit"):
            per[i]["local"].add(cell)
    return [len(p["scrap"]) + len(p["local"]) for p in per]


@dataclass(frozen=True)
class ProfileRow:
    n: int
    local: int
    global_: int
    scrap: int
    output_cells: int

    def to_json(self) -> dict:
        return {"n": self.n, "local": self.local, "global": self.global_, "scrap": self.scrap,
                "output_cells": self.output_cells}


@dataclass
class ComplexityProfile:
    oracle_id: str
    rows: list[ProfileRow]

    @property
    def slope_estimate(self) -> float | None:
        return loglog_slope([r.n for r in self.rows], [r.global_ for r in self.rows])

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.rows]


def loglog_slope(xs, ys) -> float | None:
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0]
    if len(pts) < 2:
        return None
    x, y = np.log(np.array(pts, dtype=float)).T
    return float(np.polyfit(x, y, 1)[0])


def complexity_profile(runs: Mapping[int, Trace], oracle_id: str = "") -> ComplexityProfile:
    """Local versus global cost of one query per input size.

    ``runs`` maps input size to the trace of a run that performed its
    queries from t = 0.  Raises :class:`MetricsError` if local cost varies
    with size.
    """
    rows = []
    for n, trace in sorted(runs.items()):
        outputs = {op.index for ops in trace.write_ops for op in ops}
        rows.append(ProfileRow(n, len(trace.K), trace.K[-1] if trace.K else 0,
                               len(trace.scrap_footprint), len(outputs)))
    if len({r.local for r in rows}) > 1:
        raise MetricsError(f"local step count varies with input size: {[r.local for r in rows]}")
    return ComplexityProfile(oracle_id, rows)


# -- reports ----------------------------------------------------------------------------

PER_TAU_COLUMNS = ("tau", "k_tau", "gamma_t", "g_tau", "gamma_g")


def per_tau_rows(K: list[int], g: list[int] | None, output_length: int = 1) -> list[dict]:
    rows = []
    for tau in range(1, len(K)):
        row = {"tau": tau, "k_tau": K[tau - 1], "gamma_t": K[tau] - K[tau - 1],
               "g_tau": None, "gamma_g": None}
        if g is not None:
            row["g_tau"] = g[tau - 1]
            row["gamma_g"] = float(Fraction(g[tau] - g[tau - 1], output_length))
        rows.append(row)
    return rows


def metrics_report(trace: Trace, output_length: int = 1,
                   profile: ComplexityProfile | None = None) -> dict:
    g = [space_used(trace, tau) for tau in range(1, len(trace.K) + 1)] if trace.full else None
    return {
        "per_tau": per_tau_rows(trace.K, g, output_length),
        "profile": profile.to_json() if profile else [],
        "slope_estimate": profile.slope_estimate if profile else None,
    }


def report_to_csv(report: Mapping) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PER_TAU_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report["per_tau"]:
        writer.writerow({k: ("" if row[k] is None else row[k]) for k in PER_TAU_COLUMNS})
    return buf.getvalue()


def report_from_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k in PER_TAU_COLUMNS:
            v = row[k]
            if v == "":
                parsed[k] = None
            elif k == "gamma_g":
                parsed[k] = float(v)
            else:
                parsed[k] = int(v)
        rows.append(parsed)
    return rows


def gamma_series_is_constant(trace: Trace) -> bool:
    gammas = [lorentz_time(trace, tau) for tau in range(1, len(trace.K))]
    return len(set(gammas)) <= 1


__all__ = [
    "ComplexityProfile", "MetricsError", "ProfileRow", "SummaryTraceError", "complexity_profile",
    "gamma_series_is_constant", "lorentz_space", "lorentz_time", "loglog_slope", "metrics_report",
    "per_tau_rows", "report_from_csv", "report_to_csv", "space_from_records", "space_used",
]
