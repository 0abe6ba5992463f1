"""Subgradient descent with pluggable step-size schedules.

Two geometrically decaying schedules are provided along with Polyak and
constant baselines:

* ``GeometricExact``: ``eta_t = r (1 - r^2)^(t/2) dist0 / ||g_t||``, which
  needs the initial distance to a minimizer.
* ``GeometricBanded``: ``eta_t = r (1 + (beta^2 - 2 beta) r^2)^(t/2) R / ||g_t||``,
  where ``R`` only has to fall in ``[beta, 1 - beta]`` times that distance.

Within ``S`` the distance to the tracked minimizer is then bounded by
``(1 - r^2)^(t/2) dist0`` and ``(1 + (beta^2 - 2 beta) r^2)^(t/2) dist0``
respectively, provided ``r`` does not exceed the condition number.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import ConfigurationError, ContractViolation, NumericFailureError
from .oracle import as_point, norm

__all__ = [
    "Constant",
    "DescentConfig",
    "GeometricBanded",
    "GeometricExact",
    "Polyak",
    "R_CAP",
    "STOP_REASONS",
    "Trace",
    "check_admissible",
    "decay_factor",
    "resolve_schedule",
    "run",
    "run_suite",
    "step_size",
]

R_CAP = math.sqrt(0.5)
STOP_REASONS = ("zero_subgradient", "grad_tol_reached", "max_iters")
DIVERGENCE_FACTOR = 1e6
BAND_RTOL = 1e-12


@dataclass(frozen=True)
class GeometricExact:
    """Geometric decay with the exact initial distance. ``None`` fields mean "auto"."""

    r: Optional[float] = None
    dist0: Optional[float] = None
    name = "geometric_exact"

    def __post_init__(self):
        if self.r is not None and not 0.0 < self.r <= R_CAP:
            raise ConfigurationError(f"geometric_exact needs 0 < r <= 1/sqrt(2), got r={self.r}")
        if self.dist0 is not None and not self.dist0 > 0:
            raise ConfigurationError(f"geometric_exact needs dist0 > 0, got {self.dist0}")

    @property
    def resolved(self):
        return self.r is not None and self.dist0 is not None

    @property
    def base(self):
        return 1.0 - self.r * self.r

    @property
    def scale(self):
        return self.dist0


@dataclass(frozen=True)
class GeometricBanded:
    """Geometric decay with a surrogate ``R`` for the unknown initial distance."""

    r: Optional[float] = None
    beta: float = 0.5
    R: Optional[float] = None
    name = "geometric_banded"

    def __post_init__(self):
        if self.r is not None and not 0.0 < self.r <= 1.0:
            raise ConfigurationError(f"geometric_banded needs 0 < r <= 1, got r={self.r}")
        if not 0.0 < self.beta <= 0.5:
            raise ConfigurationError(f"geometric_banded needs 0 < beta <= 0.5, got {self.beta}")
        if self.R is not None and not self.R > 0:
            raise ConfigurationError(f"geometric_banded needs R > 0, got {self.R}")

    @property
    def resolved(self):
        return self.r is not None and self.R is not None

    @property
    def base(self):
        return 1.0 + (self.beta * self.beta - 2.0 * self.beta) * self.r * self.r

    @property
    def scale(self):
        return self.R


@dataclass(frozen=True)
class Polyak:
    f_star: float = 0.0
    name = "polyak"
    resolved = True

    def __post_init__(self):
        if not math.isfinite(self.f_star):
            raise ConfigurationError("polyak needs a finite f_star")


@dataclass(frozen=True)
class Constant:
    eta: float
    name = "constant"
    resolved = True

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigurationError(f"constant schedule needs eta > 0, got {self.eta}")


Schedule = Union[GeometricExact, GeometricBanded, Polyak, Constant]
GEOMETRIC = (GeometricExact, GeometricBanded)


@dataclass(frozen=True)
class DescentConfig:
    schedule: Schedule
    max_iters: int = 1000
    grad_tol: float = 1e-12

    def __post_init__(self):
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.grad_tol >= 0:
            raise ConfigurationError(f"grad_tol must be nonnegative, got {self.grad_tol}")


def decay_factor(schedule, t):
    """``base ** (t/2)`` for a geometric schedule."""
    return math.pow(schedule.base, 0.5 * t)


def step_size(schedule, t, grad_norm, value=None):
    """Step size ``eta_t`` of ``schedule`` at iteration ``t``.

    ``value`` is the current objective value and is only read by Polyak.
    """
    if not grad_norm > 0:
        raise ContractViolation("step size requested at a zero subgradient; the loop must stop first")
    if isinstance(schedule, GEOMETRIC):
        if not schedule.resolved:
            raise ConfigurationError(f"{schedule.name} has unresolved parameters: {schedule}")
        return schedule.r * decay_factor(schedule, t) * schedule.scale / grad_norm
    if isinstance(schedule, Polyak):
        if value is None:
            raise ContractViolation("polyak step needs the current function value")
        return (value - schedule.f_star) / (grad_norm * grad_norm)
    if isinstance(schedule, Constant):
        return schedule.eta
    raise ConfigurationError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class Trace:
    """Record of one descent run.

    ``grad_norms`` has one entry per iterate (the last one is the norm that
    triggered the stop); ``step_sizes`` has one entry per step taken.
    ``anchor`` is the minimizer nearest to ``x0``, tracked for bound checks.
    """

    iterates: np.ndarray
    step_sizes: np.ndarray
    grad_norms: np.ndarray
    distances: np.ndarray
    stop_reason: str
    anchor: np.ndarray
    problem_name: str = ""

    def __len__(self):
        return len(self.iterates)

    @property
    def anchor_distances(self):
        return np.array([norm(x - self.anchor) for x in self.iterates])


def _freeze(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def _fill(schedule, problem, d0):
    cap = R_CAP if isinstance(schedule, GeometricExact) else 1.0
    mu = problem.certified.mu_bar if problem.certified is not None else None
    r = schedule.r
    if r is None:
        if mu is None:
            raise ConfigurationError(f"{problem.name}: r='auto' needs a certified condition number")
        r = min(mu, cap)
    # at a minimizer the loop stops before any step, so the scale is a placeholder
    scale = d0 if d0 > 0 else 1.0
    if isinstance(schedule, GeometricExact):
        return replace(schedule, r=r, dist0=scale if schedule.dist0 is None else schedule.dist0)
    return replace(schedule, r=r, R=0.5 * scale if schedule.R is None else schedule.R)


def resolve_schedule(schedule, problem, x0=None, *, check_band=True):
    """Fill 'auto' fields of a geometric schedule from the problem's certificate.

    ``r`` becomes ``min(mu_bar, 1/sqrt(2))`` for the exact schedule and
    ``mu_bar`` for the banded one; ``dist0`` becomes ``dist(x0; X*)`` and a
    missing ``R`` becomes the band midpoint ``0.5 dist0``.  With
    ``check_band`` an explicit ``R`` outside ``[beta, 1 - beta] dist0`` is
    rejected.
    """
    if not isinstance(schedule, GEOMETRIC):
        return schedule
    x0 = problem.default_x0 if x0 is None else as_point(x0, problem.dim)
    d0 = problem.minimizers.distance(x0)
    out = _fill(schedule, problem, d0)
    if check_band and isinstance(out, GeometricBanded) and d0 > 0:
        lo, hi = out.beta * d0, (1.0 - out.beta) * d0
        if not lo * (1 - BAND_RTOL) <= out.R <= hi * (1 + BAND_RTOL):
            raise ConfigurationError(
                f"{problem.name}: R={out.R} outside the band [{lo}, {hi}] for beta={out.beta}"
            )
    return out


def check_admissible(schedule, problem):
    """Reject ``r`` above the certified condition number of ``problem``."""
    if not isinstance(schedule, GEOMETRIC) or problem.certified is None or schedule.r is None:
        return
    mu = problem.certified.mu_bar
    if schedule.r > mu:
        raise ConfigurationError(
            f"{problem.name}: r={schedule.r} exceeds the certified condition number {mu}"
        )


def run(problem, x0, config):
    """Run subgradient descent from ``x0``.

    The loop stops when the oracle reports ``0`` in the Clarke set
    (``zero_subgradient``), when ``||g_t|| <= grad_tol``
    (``grad_tol_reached``), or after ``max_iters`` steps.

    Raises
    ------
    ConfigurationError
        If the schedule still has 'auto' fields or ``r`` exceeds the
        certified condition number.
    NumericFailureError
        If an iterate becomes non-finite or the distance grows beyond
        ``1e6`` times its initial value; ``err.trace`` holds the partial run.
    """
    x = as_point(x0, problem.dim)
    schedule = config.schedule
    if not schedule.resolved:
        raise ConfigurationError(f"{schedule.name} has unresolved parameters; use resolve_schedule")
    check_admissible(schedule, problem)

    anchor = problem.minimizers.points[problem.minimizers.nearest(x)]
    iterates, steps, gnorms, dists = [x], [], [], [problem.minimizers.distance(x)]
    d0 = dists[0]

    def partial(reason):
        return Trace(
            _freeze(iterates), _freeze(steps), _freeze(gnorms), _freeze(dists),
            reason, _freeze(anchor), problem.name,
        )

    t = 0
    while True:
        sample = problem.subgrad_select(x)
        g = sample.subgrad
        gn = norm(g)
        gnorms.append(gn)
        if sample.is_zero_subgrad_member:
            reason = "zero_subgradient"
            break
        if gn <= config.grad_tol:
            reason = "grad_tol_reached"
            break
        if t >= config.max_iters:
            reason = "max_iters"
            break
        value = problem.eval(x) if isinstance(schedule, Polyak) else None
        eta = step_size(schedule, t, gn, value)
        x_next = x - eta * g
        if not np.all(np.isfinite(x_next)):
            raise NumericFailureError(f"non-finite iterate at t={t + 1}", partial("numeric_failure"))
        x = as_point(x_next)
        d = problem.minimizers.distance(x)
        iterates.append(x)
        steps.append(eta)
        dists.append(d)
        if d0 > 0 and d > DIVERGENCE_FACTOR * d0:
            raise NumericFailureError(
                f"diverged: distance {d:.3g} exceeds {DIVERGENCE_FACTOR:g} x initial at t={t + 1}",
                partial("numeric_failure"),
            )
        t += 1
    return partial(reason)


def run_suite(problems, config_template, x0s=None, workers=None):
    """Run ``config_template`` on every problem, filling 'auto' parameters.

    ``x0s`` optionally maps problem names to starting points (default: each
    problem's ``default_x0``).  Geometric schedules require a certified
    condition number; an explicit banded ``R`` is checked against the band.
    """
    x0s = x0s or {}
    jobs = []
    for problem in problems:
        x0 = as_point(x0s.get(problem.name, problem.default_x0), problem.dim)
        schedule = config_template.schedule
        if isinstance(schedule, GEOMETRIC):
            if problem.certified is None:
                raise ConfigurationError(f"{problem.name}: geometric schedule needs a certified mu_bar")
            cap = min(problem.certified.mu_bar, R_CAP if isinstance(schedule, GeometricExact) else 1.0)
            r = cap if schedule.r is None else min(schedule.r, cap)
            schedule = replace(schedule, r=r)
            if isinstance(schedule, GeometricExact):
                schedule = replace(schedule, dist0=None)
            schedule = resolve_schedule(schedule, problem, x0)
        jobs.append((problem, x0, replace(config_template, schedule=schedule)))
    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda job: run(*job), jobs))
    return [run(*job) for job in jobs]
