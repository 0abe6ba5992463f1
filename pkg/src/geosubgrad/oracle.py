"""Problem abstraction and the built-in problem suite.

A problem is a value oracle, a Clarke subgradient *selection* (one element
plus a flag saying whether 0 belongs to the set) and a finite minimizer set.
Selecting a single element is enough: the descent loop consumes one element
per step and the stopping rule only needs the 0-membership flag.

For user problems with kinks away from the minimizers, ``subgrad_select``
may return any element of the Clarke set; the convergence guarantees
quantify over every element, so no tie-break is preferred.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, NumericFailureError, UnknownProblemError
from .quadrature import adaptive_simpson

__all__ = [
    "Certified",
    "MinimizerSet",
    "ProblemInstance",
    "SubgradientSample",
    "as_point",
    "dist_to_minimizers",
    "get_problem",
    "make_example1",
    "make_example2",
    "make_example3",
    "make_example4",
    "make_sharp_abs",
    "norm",
    "problem_names",
    "row_norms",
]

EXAMPLE3_GUARD = 1e-2
DEFAULT_QUAD_TOL = 1e-10


def as_point(x, dim=None):
    """Coerce ``x`` to a read-only 1-D float array with finite entries."""
    p = np.array(x, dtype=float, ndmin=1)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError(f"a point must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidInputError(f"point has non-finite coordinates: {p!r}")
    if dim is not None and p.size != dim:
        raise InvalidInputError(f"dimension mismatch: expected {dim}, got {p.size}")
    p.setflags(write=False)
    return p


def norm(v):
    """Euclidean norm that neither overflows nor underflows on extreme entries."""
    return math.hypot(*np.asarray(v, dtype=float).ravel())


def row_norms(V):
    """Underflow-safe Euclidean norm of every row of a 2-D array."""
    V = np.asarray(V, dtype=float)
    scale = np.max(np.abs(V), axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.sum((V / safe[:, None]) ** 2, axis=1))


@dataclass(frozen=True)
class MinimizerSet:
    """Finite, nonempty set of minimizers stored as a ``(k, dim)`` array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise InvalidInputError("minimizer set must be a nonempty list of equal-dimension points")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("minimizer coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def single(cls, point):
        return cls(np.asarray(point, dtype=float)[None, :])

    @classmethod
    def finite(cls, points):
        return cls(np.asarray(points, dtype=float))

    @property
    def kind(self):
        return "single-point" if len(self.points) == 1 else "finite-set"

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def distances(self, x):
        """Distance from ``x`` to every member."""
        x = as_point(x, self.dim)
        return np.array([norm(x - p) for p in self.points])

    def nearest(self, x):
        """Index of the nearest member (first one on ties)."""
        return int(np.argmin(self.distances(x)))

    def distance(self, x):
        return float(np.min(self.distances(x)))

    def distances_batch(self, X):
        """``(n, k)`` matrix of distances from each row of ``X`` to each member."""
        X = np.asarray(X, dtype=float)
        return np.stack([row_norms(X - p) for p in self.points], axis=1)


def dist_to_minimizers(x, X):
    """dist(x; X) for a finite minimizer set.

    >>> dist_to_minimizers([3.0, 4.0], MinimizerSet.single([0.0, 0.0]))
    5.0
    """
    x = np.array(x, dtype=float, ndmin=1)
    if x.size != X.dim:
        raise InvalidInputError(f"dimension mismatch: point has {x.size}, minimizers have {X.dim}")
    return X.distance(x)


@dataclass(frozen=True)
class SubgradientSample:
    point: np.ndarray
    value: float
    subgrad: np.ndarray
    is_zero_subgrad_member: bool = False

    def __post_init__(self):
        g = np.array(self.subgrad, dtype=float, ndmin=1)
        if not np.all(np.isfinite(g)):
            raise NumericFailureError(f"non-finite subgradient at {self.point!r}")
        g.setflags(write=False)
        object.__setattr__(self, "subgrad", g)


@dataclass(frozen=True)
class Certified:
    """Analytically known constants of a problem (None when unknown)."""

    mu_bar: float
    m: Optional[float] = None
    M: Optional[float] = None
    rho: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.mu_bar <= 1.0:
            raise InvalidInputError(f"mu_bar must lie in (0, 1], got {self.mu_bar}")
        if self.m is not None and self.m <= 0:
            raise InvalidInputError("sharpness constant m must be positive")
        if self.M is not None and self.M <= 0:
            raise InvalidInputError("Lipschitz bound M must be positive")
        if self.rho is not None and self.rho < 0:
            raise InvalidInputError("weak-convexity constant rho must be nonnegative")
        if self.gamma is not None and not 0.0 < self.gamma <= 1.0:
            raise InvalidInputError("quasar constant gamma must lie in (0, 1]")


@dataclass(frozen=True)
class ProblemInstance:
    """An objective with its subgradient selection and minimizer set.

    ``eval_batch`` and ``grad_batch`` are optional vectorised versions of
    ``eval`` and the subgradient selection, used by the samplers in
    :mod:`geosubgrad.analysis`; they must agree with the scalar oracles.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], float]
    subgrad_select: Callable[[np.ndarray], SubgradientSample]
    minimizers: MinimizerSet
    certified: Optional[Certified]
    default_x0: np.ndarray
    eval_batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    grad_batch: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("problem dimension must be positive")
        if self.minimizers.dim != self.dim:
            raise InvalidInputError("minimizer dimension does not match the problem")
        object.__setattr__(self, "default_x0", as_point(self.default_x0, self.dim))
        values = [self.eval(p) for p in self.minimizers]
        if max(values) - min(values) > 1e-12:
            raise InvalidInputError(f"{self.name}: minimizers have unequal values {values}")

    @property
    def f_star(self):
        return float(self.eval(self.minimizers.points[0]))

    def values(self, X):
        X = np.asarray(X, dtype=float)
        if self.eval_batch is not None:
            return np.asarray(self.eval_batch(X), dtype=float)
        return np.array([self.eval(x) for x in X])

    def subgrads(self, X):
        X = np.asarray(X, dtype=float)
        if self.grad_batch is not None:
            return np.asarray(self.grad_batch(X), dtype=float).reshape(X.shape)
        return np.array([self.subgrad_select(x).subgrad for x in X]).reshape(X.shape)


def _scalar(x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != 1:
        raise InvalidInputError(f"expected a 1-D point, got dimension {x.size}")
    return float(x[0])


def _origin_sample(x, value=0.0):
    x = as_point(x)
    return SubgradientSample(x, value, np.zeros_like(x), True)


# --- example 1: |3x| + sin|x| ------------------------------------------------

def _ex1_eval(x):
    t = _scalar(x)
    return abs(3.0 * t) + math.sin(abs(t))


def _ex1_subgrad(x):
    t = _scalar(x)
    if t == 0.0:
        return _origin_sample(x)
    g = math.copysign(3.0 + math.cos(t), t)
    return SubgradientSample(as_point(x), _ex1_eval(x), np.array([g]))


def _ex1_eval_batch(X):
    t = np.abs(X[:, 0])
    return 3.0 * t + np.sin(t)


def _ex1_grad_batch(X):
    t = X[:, 0]
    return (np.sign(t) * (3.0 + np.cos(t)))[:, None]


def make_example1():
    """Nonconvex yet perfectly conditioned: f(x) = |3x| + sin|x|."""
    return ProblemInstance(
        name="example1",
        dim=1,
        eval=_ex1_eval,
        subgrad_select=_ex1_subgrad,
        minimizers=MinimizerSet.single([0.0]),
        certified=Certified(mu_bar=1.0),
        default_x0=[5.0],
        eval_batch=_ex1_eval_batch,
        grad_batch=_ex1_grad_batch,
    )


# --- example 2: integral of 3 + cos(s^3) from 0 to |x| ------------------------

def _cos_cube(s):
    return np.cos(s * s * s)


def _phase_breaks(upper):
    # points where s**3 crosses multiples of pi/2, so no panel sees more than
    # a quarter period of the integrand
    kmax = int(upper**3 / (0.5 * math.pi))
    if kmax < 1:
        return np.empty(0)
    return np.cbrt(0.5 * math.pi * np.arange(1, kmax + 1))


def _cumulative(pieces, block=1024):
    # blocked prefix sums: float64 cumsum inside a block, fsum across blocks
    out = np.empty_like(pieces)
    carry = []
    for start in range(0, pieces.size, block):
        chunk = np.cumsum(pieces[start:start + block])
        base = math.fsum(carry)
        out[start:start + block] = base + chunk
        carry.append(float(np.sum(pieces[start:start + block])))
    return out


def cos_cube_integral(upper, tol=DEFAULT_QUAD_TOL):
    """``∫_0^a cos(s³) ds`` for every ``a`` in ``upper`` (all ``a ≥ 0``).

    Values are obtained in one sweep: the distinct upper limits and the
    quarter-period breakpoints are merged, each segment is integrated with
    adaptive Simpson, and prefix sums give every requested integral.  The
    per-segment budget is proportional to segment length so each result
    carries an absolute error of at most ``tol``.
    """
    upper = np.asarray(upper, dtype=float)
    if np.any(upper < 0) or not np.all(np.isfinite(upper)):
        raise InvalidInputError("integration limits must be finite and nonnegative")
    flat = upper.ravel()
    out = np.zeros(flat.size)
    positive = flat > 0
    if not np.any(positive):
        return out.reshape(upper.shape)
    limits = np.unique(flat[positive])
    top = limits[-1]
    nodes = np.union1d(np.concatenate(([0.0], limits)), _phase_breaks(top))
    lo, hi = nodes[:-1], nodes[1:]
    pieces = adaptive_simpson(_cos_cube, lo, hi, tol * (hi - lo) / top)
    prefix = _cumulative(pieces)
    at = np.searchsorted(nodes, limits) - 1
    out[positive] = prefix[at][np.searchsorted(limits, flat[positive])]
    return out.reshape(upper.shape)


def make_example2(quad_tol=DEFAULT_QUAD_TOL):
    """Twice differentiable, not weakly convex: f(x) = ∫_0^|x| (3 + cos s³) ds.

    Function values come from quadrature with absolute error ``quad_tol``;
    the subgradient is the closed-form derivative, so quadrature error never
    enters the descent direction.
    """
    if not quad_tol > 0:
        raise InvalidInputError("quad_tol must be positive")

    def eval_batch(X):
        t = np.abs(np.asarray(X, dtype=float)[:, 0])
        return 3.0 * t + cos_cube_integral(t, quad_tol)

    def eval_(x):
        t = abs(_scalar(x))
        if t == 0.0:
            return 0.0
        return 3.0 * t + float(cos_cube_integral(np.array([t]), quad_tol)[0])

    def subgrad(x):
        t = _scalar(x)
        if t == 0.0:
            return _origin_sample(x)
        g = math.copysign(3.0 + math.cos(t**3), t)
        return SubgradientSample(as_point(x), math.nan, np.array([g]))

    def grad_batch(X):
        t = X[:, 0]
        return (np.sign(t) * (3.0 + np.cos(t**3)))[:, None]

    return ProblemInstance(
        name="example2",
        dim=1,
        eval=eval_,
        subgrad_select=subgrad,
        minimizers=MinimizerSet.single([0.0]),
        certified=Certified(mu_bar=1.0),
        default_x0=[3.0],
        eval_batch=eval_batch,
        grad_batch=grad_batch,
    )


# --- example 3: exp(-1/x^4) --------------------------------------------------
# exp(-1/x**4) is below the smallest double once |x| < ~0.194; inside the
# guard radius eval and subgrad are exactly 0 and the point counts as
# numerically converged, not as a minimizer.

def _ex3_eval(x):
    t = _scalar(x)
    if abs(t) < EXAMPLE3_GUARD:
        return 0.0
    return math.exp(-1.0 / t**4)


def _ex3_subgrad(x):
    t = _scalar(x)
    if t == 0.0:
        return _origin_sample(x)
    if abs(t) < EXAMPLE3_GUARD:
        g = 0.0
    else:
        g = 4.0 / t**5 * math.exp(-1.0 / t**4)
    return SubgradientSample(as_point(x), _ex3_eval(x), np.array([g]))


def _ex3_eval_batch(X):
    t = X[:, 0]
    out = np.zeros_like(t)
    ok = np.abs(t) >= EXAMPLE3_GUARD
    with np.errstate(under="ignore"):
        out[ok] = np.exp(-1.0 / t[ok] ** 4)
    return out


def _ex3_grad_batch(X):
    t = X[:, 0]
    out = np.zeros_like(t)
    ok = np.abs(t) >= EXAMPLE3_GUARD
    with np.errstate(under="ignore"):
        out[ok] = 4.0 / t[ok] ** 5 * np.exp(-1.0 / t[ok] ** 4)
    return out[:, None]


def make_example3():
    """Not quasar convex: f(x) = exp(-1/x⁴), f(0) = 0."""
    return ProblemInstance(
        name="example3",
        dim=1,
        eval=_ex3_eval,
        subgrad_select=_ex3_subgrad,
        minimizers=MinimizerSet.single([0.0]),
        certified=Certified(mu_bar=1.0),
        default_x0=[2.0],
        eval_batch=_ex3_eval_batch,
        grad_batch=_ex3_grad_batch,
    )


# --- example 4: x1^2 + x2^2 ---------------------------------------------------

def _ex4_eval(x):
    x = np.asarray(x, dtype=float)
    return float(x @ x)


def _ex4_subgrad(x):
    x = as_point(x, 2)
    if not np.any(x):
        return _origin_sample(x)
    return SubgradientSample(x, _ex4_eval(x), 2.0 * x)


def make_example4():
    """Smooth, not sharp: f(x1, x2) = x1² + x2²."""
    return ProblemInstance(
        name="example4",
        dim=2,
        eval=_ex4_eval,
        subgrad_select=_ex4_subgrad,
        minimizers=MinimizerSet.single([0.0, 0.0]),
        certified=Certified(mu_bar=1.0),
        default_x0=[3.0, 4.0],
        eval_batch=lambda X: np.sum(X * X, axis=1),
        grad_batch=lambda X: 2.0 * X,
    )


# --- sharp convex reference: ||x|| -------------------------------------------

def make_sharp_abs(dim):
    """f(x) = ||x|| in ``dim`` dimensions; m = M = gamma = 1, rho = 0."""
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidInputError(f"dim must be a positive integer, got {dim!r}")
    dim = int(dim)

    def subgrad(x):
        x = as_point(x, dim)
        n = norm(x)
        if n == 0.0:
            return _origin_sample(x)
        return SubgradientSample(x, n, x / n)

    def grad_batch(X):
        n = row_norms(X)
        safe = np.where(n > 0, n, 1.0)
        return X / safe[:, None]

    return ProblemInstance(
        name=f"abs_norm_d{dim}",
        dim=dim,
        eval=norm,
        subgrad_select=subgrad,
        minimizers=MinimizerSet.single(np.zeros(dim)),
        certified=Certified(mu_bar=1.0, m=1.0, M=1.0, rho=0.0, gamma=1.0),
        default_x0=np.ones(dim),
        eval_batch=row_norms,
        grad_batch=grad_batch,
    )


_REGISTRY = {
    "example1": make_example1,
    "example2": make_example2,
    "example3": make_example3,
    "example4": make_example4,
}
_ABS_NORM = re.compile(r"abs_norm_d([1-9][0-9]*)")


def problem_names():
    return tuple(_REGISTRY)


def get_problem(name):
    """Look up a built-in problem by name (``example1``..``example4``, ``abs_norm_d<dim>``)."""
    if name in _REGISTRY:
        return _REGISTRY[name]()
    match = _ABS_NORM.fullmatch(name)
    if match:
        return make_sharp_abs(int(match.group(1)))
    raise UnknownProblemError(name, _REGISTRY)
