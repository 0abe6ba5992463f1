"""Command-line harness: ``run``, ``estimate``, ``suite`` and ``compare``.

Exit codes are the only success signal: 0 success, 1 error, 2 when some
theoretical bound was violated.  Files are plot-ready CSV/JSON; numbers use
the shortest decimal form that round-trips to the same double.
"""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List

from . import analysis, harness
from .descent import (
    Constant,
    DescentConfig,
    GeometricBanded,
    GeometricExact,
    Polyak,
    resolve_schedule,
    run,
)
from .errors import ConfigurationError, GeoSubgradError, UnknownProblemError
from .oracle import as_point, get_problem

SUITE_PROBLEMS = ("example1", "example2", "example3", "example4", "abs_norm_d1", "abs_norm_d2")
R_GRID = (0.1, 0.3, 0.5, None)
BETA_GRID = (0.1, 0.3, 0.5)
RATE_MARGIN = 0.05


class CLIError(Exception):
    pass


@dataclass
class RunManifest:
    problem_name: str
    x0: List[float]
    schedule: dict
    seeds: dict
    output_dir: str
    emitted_files: List[str] = field(default_factory=list)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _parse_x0(text, problem):
    if text is None:
        return problem.default_x0
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CLIError(f"cannot parse --x0 {text!r}: {exc}") from None
    return as_point(values, problem.dim)


def _parse_r(text):
    if text is None or text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise CLIError(f"--r must be 'auto' or a decimal, got {text!r}") from None


def _prepare_out(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CLIError(f"output directory {path!r} is not writable: {exc}") from None
    return out


class _Writer:
    def __init__(self, out):
        self.out = out
        self.emitted = []

    def write(self, name, text):
        (self.out / name).parent.mkdir(parents=True, exist_ok=True)
        with open(self.out / name, "w", newline="") as fh:
            fh.write(text)
        self.emitted.append(name)

    def manifest(self, manifest):
        manifest.emitted_files = sorted(self.emitted) + ["manifest.json"]
        self.write("manifest.json", _dumps(asdict(manifest)))
        missing = [n for n in manifest.emitted_files if not (self.out / n).stat().st_size]
        if missing:
            raise CLIError(f"empty output files: {missing}")


def _schedule_from_args(args, problem):
    kind = args.schedule
    r = _parse_r(args.r)
    if kind == "geometric-exact":
        return GeometricExact(r)
    if kind == "geometric-banded":
        return GeometricBanded(r, args.beta, args.R)
    if kind == "polyak":
        return Polyak(problem.f_star if args.f_star is None else args.f_star)
    if kind == "constant":
        if args.eta is None:
            raise CLIError("--schedule constant needs --eta")
        return Constant(args.eta)
    raise CLIError(f"unknown schedule {kind!r}")


def _schedule_dict(schedule):
    params = {k: v for k, v in asdict(schedule).items()}
    return {"name": schedule.name, "params": params}


def cmd_run(args):
    problem = get_problem(args.problem)
    x0 = _parse_x0(args.x0, problem)
    schedule = resolve_schedule(_schedule_from_args(args, problem), problem, x0)
    config = DescentConfig(schedule, args.max_iters, args.grad_tol)
    out = _prepare_out(args.out)
    trace = run(problem, x0, config)

    w = _Writer(out)
    w.write("trace.csv", harness.trace_to_csv(trace))
    ok = True
    if isinstance(schedule, (GeometricExact, GeometricBanded)):
        report = harness.verify_bound(trace, config)
        w.write("bound_report.json", report.to_json())
        w.write("bound_report.csv", report.to_csv())
        ok = report.all_satisfied
        verdict = "all satisfied" if ok else "VIOLATED"
        print(f"{problem.name}: {len(trace)} iterates, stop={trace.stop_reason}, "
              f"bound {report.theorem} {verdict}, fitted rate {report.fitted_rate:.6g} "
              f"(theory {report.theoretical_rate:.6g})")
    else:
        doc = {"theorem": None, "fitted_rate": harness.fit_rate(trace.distances),
               "stop_reason": trace.stop_reason}
        w.write("bound_report.json", _dumps(doc))
        print(f"{problem.name}: {len(trace)} iterates, stop={trace.stop_reason}, "
              f"no proven bound for {schedule.name}")
    w.manifest(RunManifest(problem.name, [float(v) for v in x0], _schedule_dict(schedule), {},
                           str(args.out)))
    return 0 if ok else 2


def cmd_estimate(args):
    problem = get_problem(args.problem)
    x0 = _parse_x0(args.x0, problem)
    out = _prepare_out(args.out)
    n, seed = args.samples, args.seed
    spec = analysis.estimate_condition_number(problem, x0, n, args.exclusion_radius, seed)
    reports = [
        analysis.check_sharpness(problem, x0, n, seed),
        analysis.check_lipschitz(problem, x0, n, seed),
        analysis.check_weak_convexity(problem, x0, args.rho_max, n, seed, mode="anchored"),
        analysis.check_weak_convexity(problem, x0, args.rho_max, n, seed, mode="pairwise"),
        analysis.check_quasar_convexity(problem, x0, n, seed),
    ]
    verdict = analysis.verify_lemma_bounds(problem, spec, reports)

    w = _Writer(out)
    w.write("condition_spec.json", _dumps(spec.to_dict()))
    w.write("property_reports.json", analysis.reports_to_json(reports, verdict))
    w.manifest(RunManifest(problem.name, [float(v) for v in x0], {}, {"estimate": seed}, str(args.out)))

    print(f"mu_hat = {spec.mu_hat!r} ({spec.samples_used} samples, radius {spec.radius!r})")
    for rep in reports:
        label = rep.property + (f"[{rep.mode}]" if rep.mode else "")
        print(f"{label}: {rep.value_name} = {rep.value!r}, holds = {rep.holds}")
    print(f"lemma2_ok = {verdict.lemma2_ok}, lemma3_ok = {verdict.lemma3_ok}")
    return 0


def _suite_cells(problem, r_override):
    """(theorem, unresolved schedule) pairs for one problem."""
    cells = []
    for r in ([r_override] if r_override is not None else R_GRID):
        cells.append(("thm1", GeometricExact(r)))
    d0 = problem.minimizers.distance(problem.default_x0)
    for beta in BETA_GRID:
        for R in sorted({beta * d0, 0.5 * d0, (1.0 - beta) * d0}):
            cells.append(("thm2", GeometricBanded(r_override, beta, R)))
    return cells


def _run_cell(problem, schedule, theorem, max_iters, grad_tol, out):
    row = {"problem": problem.name, "theorem": theorem, "schedule": schedule.name,
           "r": schedule.r, "beta": getattr(schedule, "beta", None),
           "R": getattr(schedule, "R", None), "dist0": None, "iterations": None,
           "stop_reason": None, "all_satisfied": False, "worst_slack": None,
           "fitted_rate": None, "theoretical_rate": None, "rate_ok": False, "error": None}
    try:
        config = DescentConfig(schedule, max_iters, grad_tol)
        trace = run(problem, problem.default_x0, config)
        report = harness.verify_bound(trace, config)
    except GeoSubgradError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row, None
    row.update(dist0=report.dist0, iterations=len(trace) - 1, stop_reason=trace.stop_reason,
               all_satisfied=report.all_satisfied, worst_slack=report.worst_slack,
               fitted_rate=report.fitted_rate, theoretical_rate=report.theoretical_rate,
               rate_ok=report.fitted_rate <= report.theoretical_rate + RATE_MARGIN)
    return row, (trace, report)


def cmd_suite(args):
    names = args.problem or list(SUITE_PROBLEMS)
    problems = [get_problem(n) for n in names]
    jobs = []
    for problem in problems:
        for theorem, schedule in _suite_cells(problem, args.r_override):
            schedule = resolve_schedule(schedule, problem)
            if problem.certified is not None and schedule.r > problem.certified.mu_bar:
                raise ConfigurationError(
                    f"{problem.name}: r={schedule.r} exceeds certified mu_bar {problem.certified.mu_bar}")
            jobs.append((problem, schedule, theorem))
    out = _prepare_out(args.out)

    def work(job):
        return _run_cell(*job, args.max_iters, args.grad_tol, out)

    workers = max(1, args.workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(job) for job in jobs]

    w = _Writer(out)
    rows = []
    for i, (row, payload) in enumerate(results):
        cell = f"cells/{row['problem']}/{i:03d}_{row['theorem']}"
        row["cell"] = cell
        if payload is not None:
            trace, report = payload
            w.write(f"{cell}/trace.csv", harness.trace_to_csv(trace))
            w.write(f"{cell}/bound_report.csv", report.to_csv())
        rows.append(row)
    columns = ["cell", "problem", "theorem", "schedule", "r", "beta", "R", "dist0", "iterations",
               "stop_reason", "all_satisfied", "worst_slack", "fitted_rate", "theoretical_rate",
               "rate_ok", "error"]
    w.write("suite_summary.csv", harness.table_to_csv(rows, columns))
    w.manifest(RunManifest(",".join(names), [], {"r_override": args.r_override}, {}, str(args.out)))

    failed = [r for r in rows if r["error"] or not r["all_satisfied"]]
    print(f"{len(rows)} cells, {len(rows) - len(failed)} with every bound satisfied")
    for r in failed:
        print(f"  FAIL {r['cell']}: {r['error'] or 'bound violated'}")
    return 0 if not failed else 2


def cmd_compare(args):
    problem = get_problem(args.problem)
    x0 = _parse_x0(args.x0, problem)
    out = _prepare_out(args.out)
    configs = [
        DescentConfig(GeometricExact(), args.max_iters, args.grad_tol),
        DescentConfig(GeometricBanded(), args.max_iters, args.grad_tol),
        DescentConfig(Polyak(problem.f_star), args.max_iters, args.grad_tol),
    ]
    if args.eta is not None:
        configs.append(DescentConfig(Constant(args.eta), args.max_iters, args.grad_tol))
    rows = harness.compare_schedules(problem, x0, configs)
    w = _Writer(out)
    w.write("comparison.csv", harness.table_to_csv(rows))
    w.write("comparison.json", harness.table_to_json(rows))
    w.manifest(RunManifest(problem.name, [float(v) for v in x0], {}, {}, str(args.out)))
    for row in rows:
        print(f"{row['schedule_name']}: iterations_to_1e-9 = {row['iterations_to_1e-9']}, "
              f"fitted_rate = {row['fitted_rate']}" + (f", error = {row['error']}" if row["error"] else ""))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geosubgrad",
        description="Geometrically decaying subgradient descent: runs, estimates and bound checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=False):
        p.add_argument("--problem", required=True, help="example1..example4 or abs_norm_d<dim>")
        p.add_argument("--x0", help="comma-separated start point (use --x0=-1,2 for negatives)")
        p.add_argument("--out", default=".", help="output directory")
        if samples:
            p.add_argument("--samples", type=int, default=10_000)
            p.add_argument("--seed", type=int, default=0)

    def descent_opts(p):
        p.add_argument("--max-iters", type=int, default=1000)
        p.add_argument("--grad-tol", type=float, default=1e-12)

    p = sub.add_parser("run", help="run descent and verify the geometric bound")
    common(p)
    p.add_argument("--schedule", default="geometric-exact",
                   choices=["geometric-exact", "geometric-banded", "polyak", "constant"])
    p.add_argument("--r", default="auto", help="decay parameter or 'auto' (certified condition number)")
    p.add_argument("--beta", type=float, default=0.5, help="band parameter for geometric-banded")
    p.add_argument("--R", type=float, default=None, help="banded scale, default 0.5 * dist0")
    p.add_argument("--eta", type=float, default=None, help="step for the constant schedule")
    p.add_argument("--f-star", type=float, default=None, help="optimal value for Polyak, default from the problem")
    descent_opts(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("estimate", help="estimate the condition number and classical properties")
    common(p, samples=True)
    p.add_argument("--rho-max", type=float, default=1e3)
    p.add_argument("--exclusion-radius", type=float, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("suite", help="run the full bound-verification matrix")
    p.add_argument("--out", default="results")
    p.add_argument("--problem", action="append", help="restrict to these problems (repeatable)")
    p.add_argument("--r-override", type=float, default=None)
    p.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    descent_opts(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("compare", help="compare geometric schedules against Polyak")
    common(p)
    p.add_argument("--eta", type=float, default=None, help="also run a constant step")
    descent_opts(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GeoSubgradError, CLIError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
