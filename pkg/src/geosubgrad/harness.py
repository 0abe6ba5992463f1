"""Bound verification for geometric runs and schedule comparison tables."""

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .descent import GeometricBanded, GeometricExact, decay_factor, resolve_schedule, run
from .errors import GeoSubgradError, InvalidInputError
from .oracle import as_point

__all__ = [
    "BoundEntry",
    "BoundReport",
    "compare_schedules",
    "fit_rate",
    "iterations_to",
    "table_to_csv",
    "table_to_json",
    "theoretical_rate",
    "trace_to_csv",
    "verify_bound",
]

FIT_FLOOR = 1e-13
BOUND_RTOL = 1e-9
TARGET = 1e-9


@dataclass(frozen=True)
class BoundEntry:
    t: int
    observed_dist: float
    bound_value: float
    satisfied: bool


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    per_iter: List[BoundEntry]
    worst_slack: float
    fitted_rate: float
    theoretical_rate: float
    dist0: float

    @property
    def all_satisfied(self):
        return all(e.satisfied for e in self.per_iter)

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "dist0": self.dist0,
            "worst_slack": self.worst_slack,
            "fitted_rate": self.fitted_rate,
            "theoretical_rate": self.theoretical_rate,
            "all_satisfied": self.all_satisfied,
            "per_iter": [
                {
                    "t": e.t,
                    "observed_dist": e.observed_dist,
                    "bound_value": e.bound_value,
                    "satisfied": e.satisfied,
                }
                for e in self.per_iter
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "observed_dist", "bound_value", "satisfied"])
        for e in self.per_iter:
            w.writerow([e.t, repr(e.observed_dist), repr(e.bound_value), int(e.satisfied)])
        return buf.getvalue()


def theoretical_rate(schedule):
    """Per-iteration contraction ``sqrt(1 - r^2)`` or ``sqrt(1 + (beta^2 - 2 beta) r^2)``."""
    if not isinstance(schedule, (GeometricExact, GeometricBanded)):
        raise InvalidInputError(f"no proven rate for schedule {schedule.name!r}")
    return math.sqrt(schedule.base)


def fit_rate(distances, floor=FIT_FLOOR):
    """exp of the least-squares slope of ``log d_t`` against ``t``.

    Only the leading run of distances above ``floor`` is used; with fewer
    than two such points the rate is reported as 1.
    """
    d = np.asarray(distances, dtype=float)
    below = np.flatnonzero(d <= floor)
    n = below[0] if below.size else d.size
    if n < 2:
        return 1.0
    t = np.arange(n, dtype=float)
    slope = np.polyfit(t, np.log(d[:n]), 1)[0]
    return float(math.exp(slope))


def verify_bound(trace, config, dist0=None):
    """Compare every iterate's distance with the proven geometric bound.

    ``bound_value[t] = base^(t/2) * dist0``; an entry is satisfied when the
    observed distance to the tracked minimizer exceeds the bound by at most
    ``1e-9 * dist0``.  A trace that stopped at a true minimizer simply has
    no entries past its last iterate.
    """
    schedule = config.schedule
    if isinstance(schedule, GeometricExact):
        theorem = "thm1"
    elif isinstance(schedule, GeometricBanded):
        theorem = "thm2"
    else:
        raise InvalidInputError(f"bound verification needs a geometric schedule, got {schedule.name!r}")
    observed = trace.anchor_distances
    d0 = float(observed[0]) if dist0 is None else float(dist0)
    tol = BOUND_RTOL * d0
    entries = []
    worst = math.inf
    for t, obs in enumerate(observed):
        bound = decay_factor(schedule, t) * d0
        slack = bound - float(obs)
        worst = min(worst, slack)
        entries.append(BoundEntry(t, float(obs), bound, slack >= -tol))
    return BoundReport(
        theorem=theorem,
        per_iter=entries,
        worst_slack=float(worst),
        fitted_rate=fit_rate(observed),
        theoretical_rate=theoretical_rate(schedule),
        dist0=d0,
    )


def iterations_to(trace, rel_target=TARGET):
    """First ``t`` with ``d_t <= rel_target * d_0``, or None if never reached."""
    d = np.asarray(trace.distances)
    if d[0] == 0.0:
        return 0
    hit = np.flatnonzero(d <= rel_target * d[0])
    return int(hit[0]) if hit.size else None


def compare_schedules(problem, x0, configs):
    """Run each config from ``x0`` and tabulate convergence speed.

    Rows carry ``schedule_name``, ``iterations_to_1e-9`` (None when the run
    stopped before reaching the target), ``fitted_rate``, ``final_dist``,
    ``stop_reason`` and ``error``; a failing config produces a row with only
    the error filled.
    """
    x0 = as_point(x0, problem.dim)
    rows = []
    for config in configs:
        row = {
            "schedule_name": config.schedule.name,
            "iterations_to_1e-9": None,
            "fitted_rate": None,
            "final_dist": None,
            "stop_reason": None,
            "error": None,
        }
        try:
            cfg = type(config)(resolve_schedule(config.schedule, problem, x0), config.max_iters, config.grad_tol)
            trace = run(problem, x0, cfg)
        except GeoSubgradError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        else:
            row["iterations_to_1e-9"] = iterations_to(trace)
            row["fitted_rate"] = fit_rate(trace.distances)
            row["final_dist"] = float(trace.distances[-1])
            row["stop_reason"] = trace.stop_reason
        rows.append(row)
    return rows


def table_to_json(rows):
    return json.dumps(rows, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def table_to_csv(rows, columns=None):
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def trace_to_csv(trace):
    """``t,observed_dist,step_size,grad_norm`` per iterate; the last row has no step."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "observed_dist", "step_size", "grad_norm"])
    for t, d in enumerate(trace.distances):
        step = repr(float(trace.step_sizes[t])) if t < len(trace.step_sizes) else ""
        w.writerow([t, repr(float(d)), step, repr(float(trace.grad_norms[t]))])
    return buf.getvalue()
