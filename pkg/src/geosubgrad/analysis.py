"""Sampling estimators for the condition number and the classical properties.

Everything here works on a deterministic sample of the ball
``S = {x : dist(x; X*) <= dist(x0; X*)}`` (a union of balls for finite
``X*``) plus a fixed set of axis-aligned probe points at geometrically
shrinking radii.  Samples are produced block by block from generators keyed
on ``(seed, block)``, so a larger ``n_samples`` always sees a superset of the
points a smaller one saw; sampled infima can only go down.

Only the oracle's selected subgradient is examined.  On the built-in suite
every point of ``S`` outside ``X*`` is differentiable, so that element is
the whole Clarke set; for user problems with kinks off ``X*`` the estimates
cover the selected element only.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .oracle import as_point, row_norms

__all__ = [
    "ConditionSpec",
    "LemmaVerdict",
    "PropertyReport",
    "check_lipschitz",
    "check_quasar_convexity",
    "check_sharpness",
    "check_weak_convexity",
    "estimate_condition_number",
    "find_midpoint_violation",
    "find_sharpness_violation",
    "reports_to_json",
    "sample_ball",
    "second_difference",
    "verify_lemma_bounds",
]

PROPERTY_FLOOR = 1e-8
LEMMA_SLACK = 1e-6
NOISE_RTOL = 1e-10
BLOCK = 4096

_VALUE_NAMES = {
    "sharpness": "m_hat",
    "weak_convexity": "rho_hat",
    "quasar_convexity": "gamma_hat",
    "lipschitz": "M_hat",
}


@dataclass(frozen=True)
class ConditionSpec:
    mu_hat: float
    n_samples: int
    exclusion_radius: float
    radius: float
    samples_used: int = 0
    seed: int = 0
    witness: Optional[np.ndarray] = field(default=None, compare=False)

    def to_dict(self):
        return {
            "mu_hat": self.mu_hat,
            "n_samples": self.n_samples,
            "exclusion_radius": self.exclusion_radius,
            "radius": self.radius,
            "samples_used": self.samples_used,
            "seed": self.seed,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
        }


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one property check.

    ``value`` is the estimated constant (m, rho, gamma or M, see
    ``value_name``).  When ``holds`` is false, ``witness`` is a sample at
    which the defining inequality fails; pairwise weak convexity also
    records the second point of the violating pair in ``partner``.
    """

    property: str
    value: float
    holds: bool
    witness: Optional[np.ndarray]
    samples_checked: int
    mode: Optional[str] = None
    partner: Optional[np.ndarray] = None

    @property
    def value_name(self):
        return _VALUE_NAMES[self.property]

    def to_dict(self):
        out = {
            "property": self.property,
            self.value_name: self.value,
            "holds": self.holds,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "samples_checked": self.samples_checked,
        }
        if self.mode is not None:
            out["mode"] = self.mode
        if self.partner is not None:
            out["partner"] = [float(v) for v in self.partner]
        return out


@dataclass(frozen=True)
class LemmaVerdict:
    """``None`` means the lemma's preconditions were not met."""

    lemma2_ok: Optional[bool]
    lemma3_ok: Optional[bool]

    def to_dict(self):
        return {"lemma2_ok": self.lemma2_ok, "lemma3_ok": self.lemma3_ok}


# --- sampling ----------------------------------------------------------------

def sample_ball(centers, radius, n, seed):
    """Uniform samples from the union of balls of ``radius`` around ``centers``.

    Returns ``(points, aux)`` where ``aux`` holds one extra random unit
    direction per sample (used to build pairs).  The first ``n`` rows never
    depend on how many more are requested.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    k, dim = centers.shape
    if int(seed) != seed or seed < 0:
        raise InvalidInputError(f"seed must be a nonnegative integer, got {seed!r}")
    pts, aux = [], []
    for b in range(-(-n // BLOCK)):
        rng = np.random.default_rng([int(seed), b])
        z = rng.standard_normal((BLOCK, dim))
        u = rng.random(BLOCK)
        idx = rng.integers(0, k, BLOCK)
        w = rng.standard_normal((BLOCK, dim))
        dirs = z / row_norms(z)[:, None]
        pts.append(centers[idx] + dirs * (radius * u ** (1.0 / dim))[:, None])
        aux.append(w / row_norms(w)[:, None])
    if not pts:
        return np.empty((0, dim)), np.empty((0, dim))
    return np.concatenate(pts)[:n], np.concatenate(aux)[:n]


def _probes(centers, radius, scales):
    centers = np.atleast_2d(centers)
    dim = centers.shape[1]
    eye = np.eye(dim)
    rows = [
        c + sign * s * radius * e
        for c in centers
        for s in scales
        for e in eye
        for sign in (1.0, -1.0)
    ]
    return np.array(rows)


def _radius(problem, x0):
    x0 = as_point(x0, problem.dim)
    radius = problem.minimizers.distance(x0)
    if radius == 0.0:
        raise InvalidInputError("x0 is a minimizer; the set S is degenerate")
    return radius


def _check_samples(n_samples):
    if int(n_samples) != n_samples or n_samples < 1:
        raise InvalidInputError(f"n_samples must be a positive integer, got {n_samples!r}")
    return int(n_samples)


def _draw(problem, x0, n_samples, seed, scales):
    radius = _radius(problem, x0)
    n = _check_samples(n_samples)
    centers = problem.minimizers.points
    X, aux = sample_ball(centers, radius, n, seed)
    P = _probes(centers, radius, scales)
    # probes get their own pair directions: the axis they lie on
    P_aux = np.repeat(np.eye(problem.dim)[None], len(centers) * len(scales), axis=0).reshape(-1, problem.dim)
    P_aux = np.repeat(P_aux, 2, axis=0)
    return radius, np.vstack([X, P]), np.vstack([aux, P_aux])


def _unit_rows(V):
    n = row_norms(V)
    return V / np.where(n > 0, n, 1.0)[:, None], n


# --- condition number --------------------------------------------------------

def estimate_condition_number(problem, x0, n_samples=10_000, exclusion_radius=None, seed=0):
    """Sampled infimum of ``<u, x - x*> / (||u|| ||x - x*||)``.

    The ratio is taken against every minimizer, at every sample farther than
    ``exclusion_radius`` (default ``1e-6`` times the radius of ``S``) from
    ``X*`` whose selected subgradient is nonzero.  Probes at ``radius`` and
    ``1e-1, 1e-2, 1e-3`` times it cover the boundary and the
    near-minimizer regime.

    Returns
    -------
    ConditionSpec
        ``mu_hat`` upper-bounds the true condition number.
    """
    radius = _radius(problem, x0)
    if exclusion_radius is None:
        exclusion_radius = 1e-6 * radius
    if not 0 < exclusion_radius < radius:
        raise InvalidInputError(
            f"exclusion_radius must lie in (0, {radius}), got {exclusion_radius}"
        )
    _, X, _ = _draw(problem, x0, n_samples, seed, (1.0, 1e-1, 1e-2, 1e-3))
    D = problem.minimizers.distances_batch(X)
    X = X[D.min(axis=1) >= exclusion_radius]
    G = problem.subgrads(X)
    U, gn = _unit_rows(G)
    ok = gn > 0
    X, U = X[ok], U[ok]
    if len(X) == 0:
        raise InvalidInputError("every sample was excluded; exclusion_radius is too large")
    ratios = np.stack(
        [np.sum(U * _unit_rows(X - p)[0], axis=1) for p in problem.minimizers], axis=1
    ).min(axis=1)
    i = int(np.argmin(ratios))
    return ConditionSpec(
        mu_hat=float(ratios[i]),
        n_samples=int(n_samples),
        exclusion_radius=float(exclusion_radius),
        radius=float(radius),
        samples_used=int(len(X)),
        seed=int(seed),
        witness=X[i].copy(),
    )


# --- classical properties ----------------------------------------------------

_SHARP_SCALES = tuple(10.0**-k for k in range(13))
_LADDER = tuple(10.0**-k for k in range(7))


def _sharpness_ratios(problem, x0, n_samples, seed, exclusion_radius):
    _, X, _ = _draw(problem, x0, n_samples, seed, _SHARP_SCALES)
    d = problem.minimizers.distances_batch(X).min(axis=1)
    keep = d > exclusion_radius
    X, d = X[keep], d[keep]
    gap = problem.values(X) - problem.f_star
    return X, d, gap / d


def check_sharpness(problem, x0, n_samples=10_000, seed=0, exclusion_radius=0.0):
    """Estimate ``m = inf (f(x) - f*) / dist(x; X*)`` over ``S``.

    Besides the random samples, probes run down to ``1e-12`` times the
    radius; a quadratic-type minimum therefore shows a ratio below the
    ``1e-8`` floor and is reported as not sharp.
    """
    X, _, ratio = _sharpness_ratios(problem, x0, n_samples, seed, exclusion_radius)
    if len(X) == 0:
        raise InvalidInputError("every sample was excluded")
    i = int(np.argmin(ratio))
    m_hat = float(ratio[i])
    holds = m_hat > PROPERTY_FLOOR
    return PropertyReport("sharpness", m_hat, holds, None if holds else X[i].copy(), len(X))


def find_sharpness_violation(problem, x0, m, n_samples=10_000, seed=0):
    """A sample within distance ``m`` of ``X*`` with ``f(x) - f* < m dist(x; X*)``, or None."""
    X, d, ratio = _sharpness_ratios(problem, x0, n_samples, seed, 0.0)
    bad = (d < m) & (ratio < m)
    if not np.any(bad):
        return None
    idx = np.flatnonzero(bad)
    return X[idx[np.argmin(ratio[idx])]].copy()


def _rho_grid(rho_max):
    return np.concatenate(([0.0], rho_max * 10.0 ** (-np.arange(64, -1, -1) / 4.0)))


def _weak_anchored(problem, X):
    f = problem.values(X)
    G = problem.subgrads(X)
    req = np.zeros(len(X))
    for p in problem.minimizers:
        fp = float(problem.eval(p))
        lin = np.sum(G * (p - X), axis=1)
        noise = NOISE_RTOL * (np.abs(f) + np.abs(lin) + abs(fp))
        deficit = f + lin - fp - noise
        d2 = np.sum((p - X) ** 2, axis=1)
        req = np.maximum(req, 2.0 * np.maximum(deficit, 0.0) / d2)
    return req, X


def _weak_pairwise(problem, X, aux, radius):
    n = len(X)
    offsets = [sign * radius * 10.0**-k for k in (3, 4, 5) for sign in (1.0, -1.0)]
    Ys = [X + h * aux for h in offsets]
    # one batched evaluation: quadrature-backed oracles sweep all limits at once
    fall = problem.values(np.vstack([X] + Ys))
    f = fall[:n]
    G = problem.subgrads(X)
    req = np.zeros(n)
    partner = X.copy()
    for j, (h, Y) in enumerate(zip(offsets, Ys)):
        fy = fall[(j + 1) * n:(j + 2) * n]
        lin = h * np.sum(G * aux, axis=1)
        noise = NOISE_RTOL * (np.abs(f) + np.abs(lin) + np.abs(fy))
        r = 2.0 * np.maximum(f + lin - fy - noise, 0.0) / (h * h)
        better = r > req
        req[better] = r[better]
        partner[better] = Y[better]
    return req, partner


def check_weak_convexity(problem, x0, rho_max=1e3, n_samples=10_000, seed=0, mode="anchored"):
    """Smallest ``rho`` on a log grid in ``[0, rho_max]`` making f rho-weakly convex on S.

    ``mode="anchored"`` tests ``f(x*) >= f(x) + <u, x* - x> - rho/2 ||x* - x||^2``
    against every minimizer, the form the sharpness-based lower bound consumes.
    ``mode="pairwise"`` tests the same inequality with ``x*`` replaced by
    nearby points ``y = x +/- h d`` (``h`` = 1e-3..1e-5 times the radius),
    i.e. ordinary weak convexity, which detects ``f'' < -rho`` directly.

    A failed check reports the largest required ``rho`` seen as ``value``.
    """
    if not rho_max > 0:
        raise InvalidInputError("rho_max must be positive")
    if mode not in ("anchored", "pairwise"):
        raise InvalidInputError(f"unknown weak-convexity mode {mode!r}")
    radius, X, aux = _draw(problem, x0, n_samples, seed, _LADDER)
    keep = problem.minimizers.distances_batch(X).min(axis=1) > 0
    X, aux = X[keep], aux[keep]
    if len(X) == 0:
        raise InvalidInputError("every sample was excluded")
    if mode == "anchored":
        req, partners = _weak_anchored(problem, X)
    else:
        req, partners = _weak_pairwise(problem, X, aux, radius)
    i = int(np.argmax(req))
    worst = float(req[i])
    if worst > rho_max:
        return PropertyReport(
            "weak_convexity", worst, False, X[i].copy(), len(X), mode,
            partners[i].copy() if mode == "pairwise" else None,
        )
    grid = _rho_grid(rho_max)
    rho_hat = float(grid[np.searchsorted(grid, worst)])
    return PropertyReport("weak_convexity", rho_hat, True, None, len(X), mode)


def check_quasar_convexity(problem, x0, n_samples=10_000, seed=0):
    """Estimate ``gamma = inf <u, x - x*> / (f(x) - f*)``, clipped above at 1.

    Samples with ``f(x) = f*`` outside ``X*`` (e.g. numerically flat
    regions) are skipped.
    """
    _, X, _ = _draw(problem, x0, n_samples, seed, _LADDER)
    keep = problem.minimizers.distances_batch(X).min(axis=1) > 0
    X = X[keep]
    gap = problem.values(X) - problem.f_star
    ok = gap > 0
    X, gap = X[ok], gap[ok]
    if len(X) == 0:
        raise InvalidInputError("every sample has f(x) = f*; quasar ratio undefined")
    G = problem.subgrads(X)
    ratio = np.stack([np.sum(G * (X - p), axis=1) for p in problem.minimizers], axis=1).min(axis=1) / gap
    i = int(np.argmin(ratio))
    raw = float(ratio[i])
    holds = raw > PROPERTY_FLOOR
    return PropertyReport(
        "quasar_convexity", min(raw, 1.0), holds, None if holds else X[i].copy(), len(X)
    )


def check_lipschitz(problem, x0, n_samples=10_000, seed=0):
    """``M = sup ||u||`` over the samples of S."""
    _, X, _ = _draw(problem, x0, n_samples, seed, _LADDER)
    gn = row_norms(problem.subgrads(X))
    i = int(np.argmax(gn))
    M_hat = float(gn[i])
    holds = math.isfinite(M_hat) and M_hat > 0
    return PropertyReport("lipschitz", M_hat, holds, None if holds else X[i].copy(), len(X))


def verify_lemma_bounds(problem, spec, reports):
    """Check ``mu_hat >= m / (2M)`` and ``mu_hat >= gamma m / M``.

    Each verdict is None unless its preconditions hold in ``reports``:
    sharpness, a Lipschitz bound and weak convexity (with
    ``dist(x0; X*) <= m / rho``) for the first; sharpness, a Lipschitz bound
    and quasar convexity for the second.  Several weak-convexity reports are
    all required to hold and the largest ``rho`` is used.  A missing
    Lipschitz report falls back to the problem's certified ``M``.
    """
    by_kind = {}
    for rep in reports:
        by_kind.setdefault(rep.property, []).append(rep)

    def constant(kind):
        reps = by_kind.get(kind, [])
        if not reps or not all(r.holds for r in reps):
            return None
        return max(r.value for r in reps) if kind == "weak_convexity" else min(r.value for r in reps)

    m = constant("sharpness")
    M = constant("lipschitz")
    if M is None and "lipschitz" not in by_kind and problem.certified is not None:
        M = problem.certified.M
    rho = constant("weak_convexity")
    gamma = constant("quasar_convexity")

    lemma2 = lemma3 = None
    if m is not None and M is not None and rho is not None:
        if rho == 0.0 or spec.radius <= m / rho:
            lemma2 = bool(spec.mu_hat >= m / (2.0 * M) - LEMMA_SLACK)
    if m is not None and M is not None and gamma is not None:
        lemma3 = bool(spec.mu_hat >= gamma * m / M - LEMMA_SLACK)
    return LemmaVerdict(lemma2, lemma3)


# --- corroborating scans -----------------------------------------------------

def second_difference(problem, x, h=1e-3, direction=None):
    """``(f(x + h d) - 2 f(x) + f(x - h d)) / h^2`` along unit ``d`` (default e_1)."""
    x = as_point(x, problem.dim)
    d = np.zeros(problem.dim) if direction is None else np.asarray(direction, dtype=float)
    if direction is None:
        d[0] = 1.0
    d = d / np.linalg.norm(d)
    f = problem.values(np.stack([x + h * d, x, x - h * d]))
    return float((f[0] - 2.0 * f[1] + f[2]) / (h * h))


def find_midpoint_violation(problem, a, b, n_points=100_000, strides=(1, 10, 100, 1000, 10_000)):
    """Scan the segment ``[a, b]`` for ``f((l + r)/2) > (f(l) + f(r))/2``.

    Triples ``(x[i-k], x[i], x[i+k])`` on an ``n_points`` grid are tested for
    each stride ``k`` and the endpoints themselves as the widest pair.
    Returns ``(left, right, gap)`` for the largest violation, or None.
    """
    a = as_point(a, problem.dim)
    b = as_point(b, problem.dim)
    s = np.linspace(0.0, 1.0, int(n_points))
    X = a + s[:, None] * (b - a)
    f = problem.values(X)
    best = None
    for k in tuple(strides) + (None,):
        if k is None:
            li, ri = np.array([0]), np.array([len(s) - 1])
            mid_val = problem.values(((a + b) / 2.0)[None])
        else:
            if 2 * k >= len(s):
                continue
            li = np.arange(0, len(s) - 2 * k)
            ri = li + 2 * k
            mid_val = f[li + k]
        avg = 0.5 * (f[li] + f[ri])
        gap = mid_val - avg - NOISE_RTOL * (np.abs(mid_val) + np.abs(avg))
        j = int(np.argmax(gap))
        if gap[j] > 0 and (best is None or gap[j] > best[2]):
            best = (X[li[j]].copy(), X[ri[j]].copy(), float(gap[j]))
    return best


def reports_to_json(reports, verdict=None):
    doc = {"reports": [r.to_dict() for r in reports]}
    if verdict is not None:
        doc["lemma_bounds"] = verdict.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
